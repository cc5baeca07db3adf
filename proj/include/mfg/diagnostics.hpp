#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg {

struct SequenceReport {
  int n = 0;
  double sum_a_over_n = 0.0;      // sum a_k / k
  double tail_fraction = 0.0;     // share of that sum from k > n/2
  bool summable = false;          // tail_fraction <= threshold
  double cesaro_avg = 0.0;        // (1/N) sum a_k
  double cesaro_avg_half = 0.0;   // same at N/2
  int step_violations = 0;        // |a_{k+1}-a_k| > c/k count (if c given)
  double final_segment_max = 0.0; // max a_k over the last 10%
};

// Finite-run proxy for "sum a_n / n converges": the tail beyond n/2 must
// carry at most `tail_threshold` of the weighted sum. a_n = 1/n passes at
// N = 1e4 (tail share ~1e-4); a_n = 1 fails (tail share ~ln2/lnN ~ 0.08).
inline SequenceReport cesaro_check(const std::vector<double>& a,
                                   std::optional<double> step_bound_c = {},
                                   double tail_threshold = 0.05) {
  SequenceReport r;
  r.n = static_cast<int>(a.size());
  if (r.n == 0) throw ValidationError("cesaro_check: empty sequence");
  double tail = 0.0, total = 0.0, cum = 0.0, cum_half = 0.0;
  const int half = r.n / 2;
  for (int k = 1; k <= r.n; ++k) {
    double v = a[k - 1];
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("cesaro_check: negative or non-finite entry");
    total += v / k;
    if (k > half) tail += v / k;
    cum += v;
    if (k <= half) cum_half = cum;
  }
  r.sum_a_over_n = total;
  r.tail_fraction = total > 0.0 ? tail / total : 0.0;
  r.summable = r.tail_fraction <= tail_threshold;
  r.cesaro_avg = cum / r.n;
  r.cesaro_avg_half = half > 0 ? cum_half / half : r.cesaro_avg;
  if (step_bound_c) {
    for (int k = 1; k < r.n; ++k)
      if (std::fabs(a[k] - a[k - 1]) > *step_bound_c / k) ++r.step_violations;
  }
  const int seg_start = r.n - std::max(1, r.n / 10);
  for (int k = seg_start; k < r.n; ++k)
    r.final_segment_max = std::max(r.final_segment_max, a[k]);
  return r;
}

enum class DecayModel { kCoverN, kCoverN2 };

// Log-space least-squares fit of c * n^{-p} (p fixed by the model) over
// n in [10, end]; reports c and the worst multiplicative deviation.
inline std::pair<double, double> fit_decay(const std::vector<double>& x,
                                           DecayModel model) {
  const int n = static_cast<int>(x.size());
  if (n < 20) throw ValidationError("fit_decay: need at least 20 points");
  const double p = model == DecayModel::kCoverN ? 1.0 : 2.0;
  double acc = 0.0;
  int cnt = 0;
  for (int k = 10; k <= n; ++k) {
    double v = x[k - 1];
    if (!(v > 0.0)) throw ValidationError("fit_decay: non-positive entry");
    acc += std::log(v) + p * std::log(static_cast<double>(k));
    ++cnt;
  }
  const double c = std::exp(acc / cnt);
  double worst = 0.0;
  for (int k = 10; k <= n; ++k)
    worst = std::max(worst, x[k - 1] / (c * std::pow(k, -p)));
  return {c, worst};
}

}  // namespace mfg
