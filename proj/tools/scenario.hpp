#pragma once

#include "mfg/chaos.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/mkv.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfglab {

using Matrix = std::vector<std::vector<double>>;

// Quadratic model: L = c_l|a|^2/2 + q|x|^2/2 + (f_cost/2)|x - rho mean|^2,
// G = (g_cost/2)|x - rho mean|^2. "lq" requires nonnegative costs and
// c_l = 1; "constant_vol_quadratic" lifts both restrictions.
struct ModelBlock {
  std::string family = "lq";
  int n = 1, d = 1;
  Matrix Sigma{{0.5}}, Sigma0{{0.2}};
  double q = 1.0, f_cost = 1.0, rho = 1.0, g_cost = 1.0, c_l = 1.0;
  std::vector<double> mu0{2.0};
  Matrix Lambda0{{0.25}};
  bool operator==(const ModelBlock&) const = default;
};

// Either a finite horizon T or a truncated discounted horizon (T_max, r).
struct GridBlock {
  std::optional<double> T;
  std::optional<double> T_max;
  double r = 0.0;
  int steps = 100;
  double horizon() const { return T ? *T : *T_max; }
  bool operator==(const GridBlock&) const = default;
};

struct EnsembleBlock {
  int paths = 64, particles = 256;
  bool operator==(const EnsembleBlock&) const = default;
};

struct Tolerances {
  double y0 = 0.02, cost = 0.02, nplayer = 0.02, gap_slope = 0.2;
  bool operator==(const Tolerances&) const = default;
};

struct StudyBlock {
  std::vector<int> Ns{8, 16, 32, 64, 128};
  int trials = 32;
  int mfe_particles = 512;
  std::vector<double> T_max_ladder;  // discounted study; empty otherwise
  bool error_terms = true;
  bool chaos_w2 = true;
  int w2_node = -1, w2_k = 0;
  Tolerances tolerances;
  bool operator==(const StudyBlock&) const = default;
};

struct SolverBlock {
  std::string method = "continuation";
  double damping = 0.5, tol = 1e-6;
  int max_iters = 200;
  double eta = 0.1, eta_floor = 1.0 / 64.0, blowup = 1e8;
  bool direct_first = true;
  double flow_tol = 1e-4;
  int max_outer = 50;
  bool operator==(const SolverBlock&) const = default;
};

struct Scenario {
  ModelBlock model;
  GridBlock grid;
  EnsembleBlock ensemble;
  StudyBlock study;
  SolverBlock solver;
  std::uint64_t seed = 1;
  bool operator==(const Scenario&) const = default;
};

// Throws mfg::MfgError(SchemaError) on malformed input, unknown keys or
// out-of-range values.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string dump_scenario(const Scenario& s);

mfg::LQParams lq_params(const Scenario& s);
mfg::GameSpec game_spec(const Scenario& s);
mfg::TimeGrid time_grid(const Scenario& s);
mfg::SolverConfig solver_config(const Scenario& s);
mfg::FlowConfig flow_config(const Scenario& s);
mfg::ChaosOptions chaos_options(const Scenario& s);

}  // namespace mfglab
