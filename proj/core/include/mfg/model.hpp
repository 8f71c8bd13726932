#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/measure.hpp"
#include "mfg/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

enum class Family { ConstantVol, Affine, LQ, General };

const char* to_string(Family f);

using VecFn_xam = std::function<Vec(const Vec& x, const Vec& a, const EmpiricalMeasure& m)>;
using MatFn_xam = std::function<Mat(const Vec& x, const Vec& a, const EmpiricalMeasure& m)>;
using RealFn_xam = std::function<double(const Vec& x, const Vec& a, const EmpiricalMeasure& m)>;
using VecFn_xamy = std::function<Vec(const Vec& x, const Vec& a, const EmpiricalMeasure& m, const Vec& y)>;
using RealFn_xm = std::function<double(const Vec& x, const EmpiricalMeasure& m)>;
using VecFn_xm = std::function<Vec(const Vec& x, const EmpiricalMeasure& m)>;
using VecFn_xmy = std::function<Vec(const Vec& x, const EmpiricalMeasure& m, const Vec& y)>;

// b(x,a) = a, sigma = Sigma, sigma0 = Sigma0, L = L0(x,a) + F(x,m).
struct ConstantVolData {
  Mat Sigma, Sigma0;
  std::function<double(const Vec& x, const Vec& a)> L0;
  std::function<Vec(const Vec& x, const Vec& a)> DxL0, DaL0;
  RealFn_xm F;
  VecFn_xm DxF;
  VecFn_xmy DmF;
  // Closed-form argmin of L0(x,a) + a.y, when available.
  std::function<Vec(const Vec& x, const Vec& y)> alpha0;
  // Structural constants of L0 and F, when known in closed form.
  std::optional<double> C_L, C_F;
};

// b = B0 + B1 a + B2 x, sigma = S0 + sum_j a_j S1[j] + sum_j x_j S2[j], and the
// same shape for sigma0.
struct AffineData {
  Vec B0;
  Mat B1, B2;
  Mat S0, C0;                  // n x d
  std::vector<Mat> S1, C1;     // k entries, n x d each
  std::vector<Mat> S2, C2;     // n entries, n x d each
};

struct LQParams {
  int n = 1;
  int d = 1;
  Mat Sigma;   // n x d
  Mat Sigma0;  // n x d
  double q = 0.0;
  double f_cost = 0.0;
  double rho = 0.0;
  double g_cost = 0.0;
  double T = 1.0;
  double r = 0.0;
  Vec mu0;      // n
  Mat Lambda0;  // n x n, symmetric PSD
  // Running cost weight on |a|^2/2; fixed to 1 for the LQ family.
  double c_l = 1.0;

  void validate(bool allow_negative_costs) const;
};

struct GameSpec {
  Dimensions dims;
  double T = 1.0;
  double r = 0.0;  // discount; > 0 only in infinite-horizon mode
  bool infinite_horizon = false;
  Family family = Family::General;
  InitialSampler m0;

  MatFn_xam sigma, sigma0;
  VecFn_xam b;
  RealFn_xam L;
  RealFn_xm G;
  VecFn_xam DxL, DaL;
  VecFn_xamy DmL;
  VecFn_xm DxG;
  VecFn_xmy DmG;

  std::optional<ConstantVolData> cv;
  std::optional<AffineData> affine;
  std::optional<LQParams> lq;
  std::optional<double> C_G;  // displacement constant of G when known

  bool constant_vol() const { return family == Family::ConstantVol || family == Family::LQ; }
  void validate() const;
};

struct HamiltonianPoint {
  Vec x, y;
  Mat z, z0;
  const EmpiricalMeasure* m = nullptr;
};

// a -> b.y + sigma.z + sigma0.z0 + L (Frobenius pairings).
double hamiltonian_objective(const GameSpec& spec, const HamiltonianPoint& p, const Vec& a);
Vec minimizer_alpha(const GameSpec& spec, const HamiltonianPoint& p);
double hamiltonian(const GameSpec& spec, const HamiltonianPoint& p);
double reduced_hamiltonian(const GameSpec& spec, const Vec& x, const Vec& y);

struct HamiltonianDerivatives {
  Vec alpha;
  Vec Dx, Dy;
  Mat Dz, Dz0;
};
HamiltonianDerivatives hamiltonian_derivatives(const GameSpec& spec, const HamiltonianPoint& p);
// Measure derivative of H at atom position xi, evaluated at the minimizer.
Vec hamiltonian_Dm(const GameSpec& spec, const HamiltonianPoint& p, const Vec& xi);

struct GradientCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = true;
};
struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double tolerance = 1e-5;
  bool pass() const;
  double max_error() const;
};
GradientCheckReport gradient_check(const GameSpec& spec, int probes, std::uint64_t rng_seed,
                                   double tolerance = 1e-5);

InitialSampler gaussian_sampler(const Vec& mean, const Mat& cov);

GameSpec make_lq(const LQParams& params);
// Same quadratic structure tagged ConstantVol; costs may be negative and the
// control weight c_l is free. Used to exercise the structural checkers.
GameSpec make_constant_vol_quadratic(const LQParams& params);
GameSpec make_constant_vol(Dimensions dims, double T, ConstantVolData data, RealFn_xm G, VecFn_xm DxG,
                           VecFn_xmy DmG, InitialSampler m0);
// Affine dynamics with a user Lagrangian (given through L, DxL, DaL, DmL).
GameSpec make_affine(Dimensions dims, double T, AffineData data, RealFn_xam L, VecFn_xam DxL,
                     VecFn_xam DaL, VecFn_xamy DmL, RealFn_xm G, VecFn_xm DxG, VecFn_xmy DmG,
                     InitialSampler m0);

// Displacement constants of the quadratic family: F = (f/2)|x - rho mean|^2
// is f * min(1, 1 - rho)-monotone.
double quadratic_displacement_constant(double weight, double rho);

}  // namespace mfg
