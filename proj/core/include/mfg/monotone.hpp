#pragma once

#include "mfg/measure.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

enum class Condition { DisplacementC, ConstantVolTradeoff, AffineLagrangian, HamiltonianCH, InfiniteHorizon };
const char* to_string(Condition c);

// Atoms are drawn i.i.d. standard Gaussian times a scale; trial t of a given
// N uses scales[t % scales.size()] and its own generator keyed by
// (seed, N, t).
struct SamplingPlan {
  std::vector<int> Ns{1, 2, 8, 32};
  int trials = 200;  // per N
  std::vector<double> scales{0.1, 1.0, 10.0};
  std::uint64_t seed = 1;
};

// A pair of N-point configurations. Only the blocks a condition uses are
// filled.
struct Configuration {
  std::vector<Vec> x, xbar, y, ybar, a, abar;
  std::vector<Mat> z, zbar, z0, z0bar;
  double slack = 0.0;  // left side minus right side of the tested inequality
  double ratio = 0.0;  // normalized form whose infimum estimates the constant
};

struct MonotonicityReport {
  Condition condition = Condition::DisplacementC;
  bool pass = true;
  // Sampled checks: infimum of the normalized form. Scalar checks: the margin.
  double estimated_constant = 0.0;
  std::optional<Configuration> worst_sample;  // attains the infimum
  std::optional<Configuration> violation;     // first sample with slack < -tolerance
  int first_violation_trial = -1;             // 1-based count of samples drawn
  int trials = 0;
  double tolerance = 1e-10;

  std::string describe() const;
};

using DisplacementField = std::function<Vec(const Vec& x, const EmpiricalMeasure& m)>;

// sum_i (DU(x^i, m_x) - DU(xbar^i, m_xbar)) . (x^i - xbar^i) >= c sum_i |x^i - xbar^i|^2.
MonotonicityReport check_displacement(const DisplacementField& DU, int n, double c, const SamplingPlan& plan = {});

// Margin C_L + min(C_G, 0) T + min(C_F, 0) T^2 / 2; pass iff positive.
MonotonicityReport check_constantvol_tradeoff(double C_L, double C_F, double C_G, double T);

// sum_i [dD_xL . dx + dD_aL . da] >= C_L sum_i |da|^2 for the affine family.
MonotonicityReport check_affine_lagrangian(const GameSpec& spec, double C_L, const SamplingPlan& plan = {});

// sum_i [-dD_xH . dx + dD_yH . dy + dD_zH : dz + dD_z0H : dz0] <= -C_H sum_i |dx|^2,
// with H evaluated at its minimizer. General specs use central differences
// of the Hamiltonian (step 1e-5).
MonotonicityReport check_hamiltonian_CH(const GameSpec& spec, double C_H, const SamplingPlan& plan = {});

// Margin r^2 - 4 C_F^- / C_L with C_F^- = -min(C_F, 0); pass iff positive.
MonotonicityReport check_infinite_horizon(double r, double C_L, double C_F);

// The derivatives of H used by the checker, exposed for tests.
struct HamiltonianGradient {
  Vec Dx, Dy;
  Mat Dz, Dz0;
};
HamiltonianGradient hamiltonian_gradient(const GameSpec& spec, const HamiltonianPoint& p);

}  // namespace mfg
