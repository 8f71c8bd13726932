#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfg {

// Player i's adjoint system in the N-player game, with the measure argument
// m^N built from the N current player states on each common-noise path:
// driver D_xH + (1/N) D_mH(., x^i), terminal D_xG + (1/N) D_mG(., x^i).
FbsdeCoefficients nplayer_coefficients(const GameSpec& spec, int N);

// Stream coordinates of player i in the coupling key space. Disjoint from the
// particle indices used by the mean field solve, so the copies are
// independent of the particles that represent the flow.
std::vector<std::uint32_t> player_stream_ids(int N);

struct NPlayerSolution {
  GameSpec spec;
  int N = 0;
  PathEnsemble ensemble;  // paths = trials, particles = players
  DecouplingMaps maps;
  std::vector<double> control;
  SolveLog log;
  std::uint64_t seed = 0;
  // Mean square per unit time of the part of dY^i not explained by
  // Z^{i,i} dW^i + Z^{i,0} dW^0: the aggregate of the off-diagonal terms
  // the symmetric basis does not represent.
  double offdiag_residual = 0.0;

  Vec alpha(int node, int trial, int player) const;
};

// Trials are common-noise paths. Players use player_stream_ids(N) under
// config.seed, matching conditionally_independent_copies with those ids.
NPlayerSolution solve_nplayer(const GameSpec& spec, int N, const TimeGrid& grid, int trials,
                              const SolverConfig& config);

// Controls from the stored (X, Y, Z, Z0) with the players' own measure.
std::vector<double> nplayer_control(const GameSpec& spec, const PathEnsemble& e);

// Per-trial cost of one player under the given controls of all players; the
// states are re-simulated from the stored noise.
std::vector<double> player_costs(const GameSpec& spec, const PathEnsemble& base, const std::vector<double>& control,
                                 int player);

struct DeviationReport {
  int player = 0;
  std::vector<double> diffs;    // per perturbation: mean over trials of deviated - equilibrium cost
  std::vector<double> stderrs;  // matching MC standard errors
  double min_diff = 0.0;
  double min_stderr = 0.0;
  double tolerance_se = 5.0;
  bool pass = true;
};
// Random smooth perturbations eps * eta(t) of player i's control, others
// frozen. Each eta is a random unit direction times a random combination of
// cos(k pi t / T), k = 0..2, normalized to sup 1.
DeviationReport nash_deviation_check(const NPlayerSolution& sol, int player, int perturbations,
                                     double eps = 0.05, std::uint64_t rng_seed = 7);

struct ExchangeabilityReport {
  std::vector<double> state_err, state_se;      // per player: E sup_t |dX|^2
  std::vector<double> control_err, control_se;  // per player: E int |d alpha|^2 dt
  double state_spread = 0.0;    // (max - min) / mean
  double control_spread = 0.0;
  double tolerance_se = 3.0;
  bool pass = true;
};
// Compares each player with its copy; all players must agree within
// tolerance_se combined standard errors of each other.
ExchangeabilityReport exchangeability_check(const NPlayerSolution& sol, const PathEnsemble& copies,
                                            const std::vector<double>& copy_control);

}  // namespace mfg
