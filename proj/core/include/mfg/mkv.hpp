#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/measure.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mfg {

// Adjoint system of the mean field game: drift D_yH, volatilities D_zH and
// D_z0H, driver D_xH (applied with the solver's sign convention), terminal
// D_xG, all evaluated at the Hamiltonian minimizer.
FbsdeCoefficients mkv_coefficients(const GameSpec& spec);

struct FlowConfig {
  double flow_tol = 1e-4;
  int max_outer = 50;
};

struct MfeSolution {
  GameSpec spec;
  PathEnsemble ensemble;
  MeasureFlow flow;
  DecouplingMaps maps;
  std::vector<double> control;  // k values per ensemble entry, all nodes
  SolveLog log;
  std::vector<double> flow_changes;  // per outer iteration
  int outer_iterations = 0;
  std::uint64_t seed = 0;

  Vec alpha(int node, int path, int particle) const;

  // Ensemble, control and flow in the flat little-endian layout.
  void write(std::ostream& out) const;
};

struct MfeData {
  PathEnsemble ensemble;
  MeasureFlow flow;
  std::vector<double> control;
  int outer_iterations = 0;
  double r = 0.0;
};
MfeData read_mfe(std::istream& in);

MfeSolution solve_mkv(const GameSpec& spec, const TimeGrid& grid, const EnsembleLayout& layout,
                      const SolverConfig& config, const FlowConfig& flow_config = {});

// Fills the control array from the stored (X, Y, Z, Z0) and flow.
std::vector<double> extract_control(const GameSpec& spec, const PathEnsemble& e, const MeasureFlow& flow);

// Re-simulates N particles per common-noise path through the frozen
// decoupling maps and the frozen flow of sol. Particle i uses stream
// coordinate particle_ids[i] (identity when empty) of the seed's key space,
// and the common noise of the same path.
PathEnsemble conditionally_independent_copies(const MfeSolution& sol, int N,
                                              const std::vector<std::uint32_t>& particle_ids = {});

struct CostEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;  // over common-noise paths
};

// Left-endpoint quadrature of L plus the terminal cost, discounted by e^{-rt}.
CostEstimate mfe_cost(const MfeSolution& sol);
// Same estimator on arbitrary states and controls; the measure is the flow,
// or the ensemble itself when null.
// Returns per-path means.
std::vector<double> path_costs(const GameSpec& spec, const PathEnsemble& e, const std::vector<double>& control,
                               const MeasureFlow* flow);

// Re-simulates X from the stored initial states and noise under the given
// control; the measure is the frozen flow, or the ensemble itself when null.
PathEnsemble resimulate(const GameSpec& spec, const PathEnsemble& base, const std::vector<double>& control,
                        const MeasureFlow* flow);

struct OptimalityCheck {
  double eps = 0.0;
  std::string direction;
  double mean_diff = 0.0;  // J(alpha + eps eta) - J(alpha)
  double stderr_ = 0.0;
  bool pass = true;
};
struct OptimalityReport {
  std::vector<OptimalityCheck> checks;
  double tolerance_se = 5.0;
  bool pass() const;
};
// First-order deviation test of the equilibrium control against the frozen
// flow, for eps in {1e-2, 1e-3} and smooth bounded directions of both signs.
OptimalityReport mfe_optimality_check(const MfeSolution& sol, const std::vector<double>& eps = {1e-2, 1e-3});

// RMS over entries of Y + D_aL0(X, alpha) for a fresh backward pass on the
// solved states (constant-volatility family).
double drift_control_residual(const MfeSolution& sol);

}  // namespace mfg
