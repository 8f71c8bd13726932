#pragma once

#include "mfg/fbsde.hpp"
#include "mfg/mkv.hpp"
#include "mfg/model.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/riccati.hpp"
#include "mfg/stats.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

// Mean squares of the error terms over players, time nodes and one trial.
// Constant volatility fills F and G; the affine family fills L (with the D_a
// part) and G; the general family fills L, b, sigma, sigma0 and G.
struct ErrorTerms {
  std::optional<double> F, G, L, b, sigma, sigma0;
};

// Error terms of N copies on one common-noise path against the flow of that
// path. copy_control holds the copies' controls (k values per entry).
ErrorTerms error_terms(const GameSpec& spec, const PathEnsemble& copies, const std::vector<double>& copy_control,
                       const MeasureFlow& flow, int path);

// Mean over trials of sum_i dX^i . dY^i per node.
std::vector<double> coupled_lyapunov(const PathEnsemble& nplayer, const PathEnsemble& copies);

// Rate r_{N,q} of the empirical-measure bound; q = 4 uses the q in (2,4) branch
// of the n >= 4 formulas as written.
double rnq(int n, double q, int N);

struct ChaosOptions {
  int mfe_particles = 512;  // particles per path representing the flow
  int w2_node = -1;         // node of the chaos_w2 column; -1 is the terminal node
  int w2_k = 0;             // first k players; 0 uses all N
  bool error_terms = true;  // per-trial error-term columns
  bool chaos_w2 = true;     // per-trial chaos_w2 column
  FlowConfig flow;
};

struct ChaosRow {
  int N = 0, trial = 0;
  double sup_state_err = 0.0;  // mean_i sup_t w(t) |dX|^2
  double control_err = 0.0;    // mean_i int w(t) |d alpha|^2 dt, left endpoint
  std::optional<double> chaos_w2;
  ErrorTerms terms;
  std::uint64_t seed = 0;
};

struct ChaosSummary {
  int N = 0;
  double mean_sup_state_err = 0.0, stderr_ = 0.0;
  double mean_control_err = 0.0, control_stderr = 0.0;
  double mean_eF = 0.0, mean_eG = 0.0;  // 0 when absent
};

struct ChaosStudyResult {
  std::vector<int> Ns;
  std::vector<ChaosRow> rows;  // ordered by (N index, trial)
  std::vector<ChaosSummary> summary;
  std::optional<LinearFit> fit;  // log mean sup_state_err against log N
  std::optional<LinearFit> fit_eF, fit_eG;
  std::vector<std::vector<double>> lyapunov;  // per N, per node
  // Observed q-th moments max_t mean_paths M_q(m_t) along the flow, q = 2..4.
  std::vector<double> flow_moments;
  std::vector<int> offdiag_N;
  std::vector<double> offdiag_residual;
  std::string aborted;  // non-empty when a cell failed; rows hold the completed cells

  void write_csv(std::ostream& out) const;
  void write_summary_csv(std::ostream& out) const;
};

// Weights w(t) are e^{-rt} when spec.r > 0, otherwise 1.
ChaosStudyResult run_chaos_study(const GameSpec& spec, const std::vector<int>& Ns, int trials, const TimeGrid& grid,
                                 const SolverConfig& config, const ChaosOptions& options = {});

struct RiccatiGapStudy {
  std::vector<int> Ns;
  std::vector<double> gaps;
  LinearFit fit;
};
RiccatiGapStudy riccati_gap_study(const LQParams& params, const std::vector<int>& Ns);

struct InfiniteHorizonResult {
  std::vector<double> T_max;
  std::vector<ChaosStudyResult> studies;
  // Per consecutive T_max pair, max over N of the relative change of the
  // mean sup_state_err and control_err.
  std::vector<double> truncation_sensitivity;
};
// Runs the discounted study truncated at each T_max with the given step size.
InfiniteHorizonResult run_infinite_horizon_study(const GameSpec& spec, const std::vector<int>& Ns, int trials,
                                                 const std::vector<double>& T_max, double dt,
                                                 const SolverConfig& config, const ChaosOptions& options = {});

}  // namespace mfg
