#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/model.hpp"

#include <vector>

namespace mfg {

// Feedback Y = P(t) X + S(t) mean for the quadratic family. Costs are
// isotropic, so both blocks are scalar multiples of the identity; P(t) and
// S(t) return the n x n matrices.
struct RiccatiSolution {
  int n = 1;
  double T = 1.0;
  double r = 0.0;
  double c_l = 1.0;
  int N = 0;  // 0: mean field equilibrium; otherwise the N-player equilibrium
  int steps = 0;
  std::vector<double> p, s;    // values on the fine grid
  std::vector<double> dp, ds;  // time derivatives, for Hermite interpolation

  double p_at(double t) const;
  double s_at(double t) const;
  Mat P(double t) const;
  Mat S(double t) const;
};

RiccatiSolution solve_riccati_mfe(const LQParams& params, int steps = 10000);
RiccatiSolution solve_riccati_nplayer(const LQParams& params, int N, int steps = 10000);
// Single agent facing F(x, delta_x): the N = 1 reduction.
RiccatiSolution solve_riccati_single_agent(const LQParams& params, int steps = 10000);
// Stationary feedback (infinite horizon), by backward integration until the
// relative change per unit time drops below 1e-12.
RiccatiSolution solve_riccati_stationary(const LQParams& params, int N = 0);

// sup_t |P_N - P| + |S_N - S| over the fine grid.
double riccati_gap(const RiccatiSolution& nplayer, const RiccatiSolution& mfe);

// E[Y_0] = (P(0) + S(0)) mu0.
Vec riccati_y0_mean(const LQParams& params, const RiccatiSolution& sol);
// Equilibrium cost J_m(alpha) from the second-moment ODEs (discounted when
// r > 0). For a stationary solution the horizon is params.T.
double riccati_mfe_cost(const LQParams& params, const RiccatiSolution& sol);

// Exact-feedback Euler trajectories on the ensemble noise. For the N-player
// variant particles must equal N and the feedback uses the players' own mean;
// for the mean field variant the conditional mean follows its closed SDE.
PathEnsemble oracle_paths(const RiccatiSolution& sol, const LQParams& params, const NoiseStreams& streams,
                          const TimeGrid& grid, const EnsembleLayout& layout);
// Same, on an ensemble whose noise and initial states are already sampled.
void oracle_paths_inplace(const RiccatiSolution& sol, const LQParams& params, PathEnsemble& e);

// Shared Euler step so that every simulator applies the same operation order.
inline Vec euler_step(const Vec& x, const Vec& drift, const WideMat& vol, const WideVec& w, double dt) {
  return x + drift * dt + vol * w;
}

}  // namespace mfg
