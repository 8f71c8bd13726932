#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/measure.hpp"
#include "mfg/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mfg {

using FbsdeFn = std::function<Vec(double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                                  const EmpiricalMeasure& m)>;
using FbsdeVolFn = std::function<WideMat(double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                                         const EmpiricalMeasure& m)>;
using TerminalFn = std::function<Vec(const Vec& x, const EmpiricalMeasure& m)>;

// dX = drift dt + vol (dW, dW0),  Y_t = terminal + int_t^T driver ds - int Z dW.
// With r > 0 the driver is applied as driver - r Y.
struct FbsdeCoefficients {
  Dimensions dims;
  FbsdeFn drift;
  FbsdeVolFn vol;  // n x 2d
  FbsdeFn driver;
  TerminalFn terminal;
  double r = 0.0;
};

enum class SolverMethod { Picard, Continuation };

struct SolverConfig {
  double picard_damping = 0.5;
  double picard_tol = 1e-6;
  int picard_max_iters = 200;
  double eta = 0.1;
  double eta_floor = 1.0 / 64.0;
  SolverMethod method = SolverMethod::Continuation;
  std::uint64_t seed = 1;
  double blowup_bound = 1e8;
  // Try the target system directly from the current (or zero) maps before
  // falling back to the homotopy from the linear base system.
  bool direct_first = true;

  void validate() const;
};

// Basis [1, x, upper(x x^T), mean, |mean|^2].
int basis_size(int n);
void basis_row(const double* x, const Vec& mean, int n, double* out);

// Per-node regression coefficients mapping basis values to (Y, Z, Z0).
// coef[j] is basis_size x (n + 2 n d); Z blocks are row-major n x d.
// lo/hi hold the range of the mean feature in the fitting sample at each
// node; evaluation clamps the mean into it.
struct DecouplingMaps {
  int n = 0, d = 0;
  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::VectorXd> lo, hi;

  bool empty() const { return coef.empty(); }
  void evaluate(int node, const double* x, const Vec& mean, Vec& y, Mat& z, Mat& z0) const;
  void blend(const DecouplingMaps& proposal, double theta);
};

// Additive source processes of the continuation map. b0, s0 and f0 are
// indexed like the ensemble for nodes j < steps; g0 holds one terminal value
// per (path, particle), stored at the node-0 entry index.
struct FbsdeSources {
  std::vector<double> b0, s0, f0, g0;
};

struct HomotopyStep {
  double delta = 0.0;
  double eta = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool accepted = false;
};

struct SolveLog {
  std::vector<double> residuals;  // sup change of (X, Y) per sweep
  std::vector<HomotopyStep> steps;
  int sweeps = 0;
  bool converged = false;
};

// Measure seen by the coefficients at (node, path): the ensemble's own slice
// when flow is null, otherwise the frozen flow.
void forward_pass(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow);
void forward_pass_feedback(const FbsdeCoefficients& coeffs, PathEnsemble& e, const DecouplingMaps& maps,
                           const MeasureFlow* flow, const FbsdeSources* sources = nullptr);
void backward_pass(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                   DecouplingMaps* maps_out = nullptr, const FbsdeSources* sources = nullptr);

SolveLog picard_solve(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                      const SolverConfig& config, DecouplingMaps* maps_out = nullptr);
// Runs the delta-homotopy from the linear system to the target. With
// direct_first, delta = 1 is first attempted from the incoming maps (zero if
// empty) and the homotopy only runs if that fails. On exit maps holds the final decoupling maps and
// the ensemble is the feedback forward pass through them.
SolveLog continuation_solve(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                            const SolverConfig& config, DecouplingMaps& maps);

// Coefficients of the interpolated system at delta.
FbsdeCoefficients homotopy_coefficients(const FbsdeCoefficients& base, double delta);

struct ResidualReport {
  double forward_residual = 0.0;
  double terminal_defect = 0.0;
  double bsde_defect = 0.0;
};
ResidualReport residual_diagnostics(const FbsdeCoefficients& coeffs, const PathEnsemble& e,
                                    const MeasureFlow* flow);
// Per-node mean over paths of sum_i (Xa - Xb).(Ya - Yb); particles of a path
// are matched by index.
std::vector<double> coupled_diagnostic(const PathEnsemble& a, const PathEnsemble& b);

// Sup-norm distance over X and Y.
double sup_change(const PathEnsemble& a, const PathEnsemble& b);

}  // namespace mfg
