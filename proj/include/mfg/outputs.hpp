#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfg/report.hpp"
#include "mfg/wasserstein.hpp"

namespace mfg {

// Shortest round-trip decimal form; the single serialization used by every
// CSV so identical runs produce byte-identical files.
inline std::string fmt_double(double v) {
  if (!std::isfinite(v))
    throw ValidationError("fmt_double: refusing to serialize NaN/Inf");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path.string());
  return f;
}

inline void write_iterations_csv(const std::filesystem::path& path,
                                 const PlayReport& rep) {
  auto f = open_out(path);
  f << "n,phi,a_n,du_inf,dgrad_inf,dm_inf,dw_inf,residual_hjb,residual_fp\n";
  for (int n = 1; n <= rep.iterations; ++n) {
    size_t i = n - 1;
    auto at = [&](const std::vector<double>& v) {
      return i < v.size() ? v[i] : 0.0;
    };
    StepVariation var =
        i < rep.variations.size() ? rep.variations[i] : StepVariation{};
    f << n << ',' << fmt_double(at(rep.phi)) << ',' << fmt_double(at(rep.a))
      << ',' << fmt_double(var.du_inf) << ',' << fmt_double(var.dgrad_inf)
      << ',' << fmt_double(var.dm_inf) << ',' << fmt_double(var.dw_inf) << ','
      << fmt_double(at(rep.res_hjb)) << ',' << fmt_double(at(rep.res_fp))
      << '\n';
  }
}

inline void write_density_csv(const std::filesystem::path& path,
                              const DensityFlow& flow, const TorusGrid& g,
                              const TimeGrid& tg) {
  flow.validate(g, tg);
  auto f = open_out(path);
  f << (g.dim == 1 ? "t,x,m\n" : "t,x,y,m\n");
  for (int k = 0; k <= tg.K; ++k)
    for (int i = 0; i < g.cells(); ++i) {
      f << fmt_double(tg.t(k)) << ',' << fmt_double(g.coord(i, 0));
      if (g.dim == 2) f << ',' << fmt_double(g.coord(i, 1));
      f << ',' << fmt_double(flow.slices[k].w[i]) << '\n';
    }
}

inline void write_report_json(const std::filesystem::path& path,
                              const PlayReport& rep, const TorusGrid& g,
                              const TimeGrid& tg) {
  nlohmann::ordered_json j;
  j["mode"] = rep.mode;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["grid"] = {{"dim", g.dim}, {"points_per_dim", g.points_per_dim}};
  j["time"] = {{"T", tg.T}, {"K", tg.K}};
  j["final_phi"] = rep.phi.empty() ? 0.0 : rep.phi.back();
  j["final_a"] = rep.a.empty() ? 0.0 : rep.a.back();
  j["final_residual_hjb"] = rep.final_res_hjb;
  j["final_residual_fp"] = rep.final_res_fp;
  j["pushforward_gap"] = rep.eq44_gap;
  j["d1_initial_gap"] = rep.d1_initial_gap;
  j["wall_seconds"] = rep.wall_seconds;
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

// --- minimal self-contained SVG emission -------------------------------

namespace svg {

inline double map_lin(double v, double lo, double hi, double a, double b) {
  if (hi <= lo) return (a + b) / 2.0;
  return a + (v - lo) / (hi - lo) * (b - a);
}

struct Series {
  std::string name;
  std::vector<double> y;
};

inline void line_chart(const std::filesystem::path& path,
                       const std::vector<Series>& series,
                       const std::string& title, bool log_y) {
  const double W = 720, H = 480, ml = 60, mr = 20, mt = 40, mb = 40;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.y.size());
    for (double v : s.y) {
      double t = log_y ? std::log10(std::max(v, 1e-300)) : v;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (len == 0) {
    lo = 0;
    hi = 1;
    len = 1;
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  f << "<rect width=\"" << W << "\" height=\"" << H
    << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">"
    << title << (log_y ? " (log y)" : "") << "</text>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.y.empty()) continue;
    f << "<polyline fill=\"none\" stroke=\"" << colors[si % 4]
      << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.y.size(); ++i) {
      double v = log_y ? std::log10(std::max(s.y[i], 1e-300)) : s.y[i];
      double x = map_lin(static_cast<double>(i), 0.0,
                         static_cast<double>(len > 1 ? len - 1 : 1), ml,
                         W - mr);
      double y = map_lin(v, lo, hi, H - mb, mt);
      f << fmt_double(x) << ',' << fmt_double(y) << ' ';
    }
    f << "\"/>\n";
    f << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 16 + 18 * si
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
      << colors[si % 4] << "\">" << s.name << "</text>\n";
  }
  f << "</svg>\n";
}

// Time-by-space color map: one rect per (time node, cell), so a file with
// exactly (K+1) * Nx pixels at desk-scale K. Very fine time grids are
// strided down to at most 512 rows to keep the file size sane.
inline void heatmap(const std::filesystem::path& path, const DensityFlow& flow,
                    const TorusGrid& g, const std::string& title) {
  const int total = static_cast<int>(flow.slices.size());
  const int stride = (total + 511) / 512;
  std::vector<int> keep;
  for (int k = 0; k < total; k += stride) keep.push_back(k);
  const int rows = static_cast<int>(keep.size());
  const int cols = g.cells();
  double hi = 0.0;
  for (const auto& s : flow.slices)
    for (double v : s.w) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  const double W = 720, H = 480, ml = 60, mt = 40, mb = 20, mr = 20;
  const double cw = (W - ml - mr) / cols, ch = (H - mt - mb) / rows;
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  f << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">"
    << title << "</text>\n";
  for (int k = 0; k < rows; ++k)
    for (int i = 0; i < cols; ++i) {
      double v = std::max(flow.slices[keep[k]].w[i], 0.0) / hi;
      int r = static_cast<int>(255 * v);
      int b = 255 - r;
      f << "<rect x=\"" << fmt_double(ml + i * cw) << "\" y=\""
        << fmt_double(mt + k * ch) << "\" width=\"" << fmt_double(cw)
        << "\" height=\"" << fmt_double(ch) << "\" fill=\"rgb(" << r << ",0,"
        << b << ")\"/>\n";
    }
  f << "</svg>\n";
}

}  // namespace svg

// --- density CSV reader and run comparison ------------------------------

struct StoredFlow {
  TorusGrid grid;
  TimeGrid time;
  DensityFlow flow;
};

inline StoredFlow read_density_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read: " + path.string());
  std::string line;
  if (!std::getline(f, line))
    throw ValidationError("empty density file: " + path.string());
  const int dim = line == "t,x,m" ? 1 : line == "t,x,y,m" ? 2 : 0;
  if (dim == 0)
    throw ValidationError("unrecognized density header in " + path.string());

  std::vector<double> ts;
  std::vector<std::vector<double>> rows;  // t index -> densities in file order
  std::set<double> xs;
  double t_prev = -1.0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != dim + 2)
      throw ValidationError("malformed density row in " + path.string());
    if (vals[0] != t_prev) {
      ts.push_back(vals[0]);
      rows.emplace_back();
      t_prev = vals[0];
    }
    xs.insert(vals[1]);
    rows.back().push_back(vals.back());
  }
  if (ts.size() < 2)
    throw ValidationError("density file needs at least 2 time nodes: " +
                          path.string());
  const int n = static_cast<int>(xs.size());
  TorusGrid g(dim, n);
  TimeGrid tg(ts.back(), static_cast<int>(ts.size()) - 1);
  DensityFlow flow;
  for (auto& r : rows) {
    if (static_cast<int>(r.size()) != g.cells())
      throw ValidationError("inconsistent slice size in " + path.string());
    flow.slices.push_back(ProbabilityVector{std::move(r)});
  }
  flow.validate(g, tg);
  return StoredFlow{g, tg, std::move(flow)};
}

struct CompareReport {
  double sup_d1 = 0.0;
  int slices = 0;
};

inline CompareReport compare_runs(const std::filesystem::path& dir_a,
                                  const std::filesystem::path& dir_b) {
  StoredFlow a = read_density_csv(dir_a / "density_final.csv");
  StoredFlow b = read_density_csv(dir_b / "density_final.csv");
  if (a.grid != b.grid)
    throw DimensionError("compare: runs use different grids");
  if (a.time != b.time)
    throw DimensionError("compare: runs use different time grids");
  return CompareReport{sup_t_d1(a.flow, b.flow, a.grid),
                       static_cast<int>(a.flow.slices.size())};
}

inline void emit_outputs(const std::filesystem::path& dir,
                         const PlayReport& rep, const TorusGrid& g,
                         const TimeGrid& tg, bool emit_plots) {
  std::filesystem::create_directories(dir);
  write_iterations_csv(dir / "iterations.csv", rep);
  write_density_csv(dir / "density_final.csv", rep.final_belief, g, tg);
  write_report_json(dir / "report.json", rep, g, tg);
  if (emit_plots) {
    svg::line_chart(dir / "phi.svg", {{"phi", rep.phi}}, "potential vs n",
                    false);
    svg::line_chart(dir / "a_n.svg", {{"a_n", rep.a}}, "exploitability vs n",
                    true);
    svg::heatmap(dir / "density.svg", rep.final_belief, g,
                 "final belief, time (down) by space (across)");
  }
}

}  // namespace mfg
