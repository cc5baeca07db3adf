#pragma once

#include <string>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

struct StepVariation {
  double du_inf = 0.0;
  double dgrad_inf = 0.0;
  double dm_inf = 0.0;
  double dw_inf = 0.0;
};

// Per-run record shared by all three loops.
struct PlayReport {
  std::string mode;
  int iterations = 0;
  bool converged = false;
  std::vector<double> phi;         // potential history, entry n-1 = iterate n
  std::vector<double> a;           // exploitability / decrease history
  std::vector<StepVariation> variations;
  std::vector<double> res_hjb;     // parabolic: per-iteration residuals
  std::vector<double> res_fp;
  DensityFlow final_belief;
  double final_res_hjb = 0.0;
  double final_res_fp = 0.0;
  double eq44_gap = 0.0;           // first-order: pushforward consistency
  double d1_initial_gap = 0.0;     // n-player: d1(m0^N, m0)
  double wall_seconds = 0.0;
};

}  // namespace mfg
