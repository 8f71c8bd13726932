#include "doctest.h"
#include "mfg/ensemble.hpp"
#include "mfg/fbsde.hpp"
#include "mfg/measure.hpp"
#include "mfg/riccati.hpp"
#include "support.hpp"

#include <cmath>

using namespace mfg;
using testing::vec1;

namespace {

using Fn = std::function<double(double t, double x, double y)>;

// Scalar coefficients: drift b(t,x,y), constant volatilities (s, s0), driver
// f(t,x,y) and terminal g(x).
FbsdeCoefficients scalar(Fn b, double s, double s0, Fn f, std::function<double(double)> g) {
  FbsdeCoefficients c;
  c.dims = {1, 1, 1};
  c.drift = [b](double t, const Vec& x, const Vec& y, const Mat&, const Mat&, const EmpiricalMeasure&) {
    return vec1(b(t, x[0], y[0]));
  };
  c.vol = [s, s0](double, const Vec&, const Vec&, const Mat&, const Mat&, const EmpiricalMeasure&) {
    WideMat v(1, 2);
    v << s, s0;
    return v;
  };
  c.driver = [f](double t, const Vec& x, const Vec& y, const Mat&, const Mat&, const EmpiricalMeasure&) {
    return vec1(f(t, x[0], y[0]));
  };
  c.terminal = [g](const Vec& x, const EmpiricalMeasure&) { return vec1(g(x[0])); };
  return c;
}

Fn zero() {
  return [](double, double, double) { return 0.0; };
}

PathEnsemble ensemble(int paths, int particles, TimeGrid grid, double mean = 2.0, double var = 0.25,
                      std::uint64_t seed = 1) {
  return PathEnsemble::sample({1, 1, 1}, grid, {paths, particles}, NoiseStreams(seed),
                              gaussian_sampler(vec1(mean), Mat::Constant(1, 1, var)));
}

}  // namespace

TEST_SUITE("fbsde") {
  TEST_CASE("driftless forward pass sums the increments") {
    PathEnsemble e = ensemble(2, 5, {1.0, 20});
    forward_pass(scalar(zero(), 1.0, 1.0, zero(), [](double) { return 0.0; }), e, nullptr);
    for (int p = 0; p < 2; ++p)
      for (int i = 0; i < 5; ++i) {
        double w = 0.0;
        for (int j = 0; j < 20; ++j) {
          w += e.dw_data(j, p, i)[0] + e.dw0_data(j, p)[0];
          CHECK(std::abs(e.x(j + 1, p, i)[0] - (e.x(0, p, i)[0] + w)) <= 1e-12);
        }
      }
  }

  TEST_CASE("constant drift without noise") {
    PathEnsemble e = ensemble(1, 3, {2.0, 40});
    forward_pass(scalar([](double, double, double) { return 0.7; }, 0.0, 0.0, zero(), [](double) { return 0.0; }), e,
                 nullptr);
    for (int j = 0; j <= 40; ++j) CHECK(std::abs(e.x(j, 0, 2)[0] - (e.x(0, 0, 2)[0] + 0.7 * j * 0.05)) <= 1e-12);
  }

  TEST_CASE("linear growth drift matches the ODE mean") {
    PathEnsemble e = ensemble(1, 2000, {1.0, 1000});
    forward_pass(scalar([](double, double x, double) { return x; }, 0.5, 0.0, zero(), [](double) { return 0.0; }), e,
                 nullptr);
    double m = 0, v = 0;
    for (int i = 0; i < 2000; ++i) {
      const double x = e.x(1000, 0, i)[0];
      m += x;
      v += x * x;
    }
    m /= 2000;
    const double se = std::sqrt((v / 2000 - m * m) / 2000);
    CHECK(std::abs(m - 2.0 * std::exp(1.0)) <= 3 * se);
  }

  TEST_CASE("pure common noise keeps each conditional law a point mass") {
    PathEnsemble e = ensemble(3, 6, {1.0, 10}, 1.0, 0.0);
    forward_pass(scalar(zero(), 0.0, 1.0, zero(), [](double) { return 0.0; }), e, nullptr);
    for (int p = 0; p < 3; ++p) {
      const EmpiricalMeasure m = conditional_law(e, 10, p);
      double w0 = 0.0;
      for (int j = 0; j < 10; ++j) w0 += e.dw0_data(j, p)[0];
      for (int i = 0; i < 6; ++i) CHECK(m.atom(i)[0] == m.atom(0)[0]);
      CHECK(m.mean()[0] == doctest::Approx(1.0 + w0).epsilon(1e-12));
    }
  }

  TEST_CASE("martingale representation of X_T") {
    PathEnsemble e = ensemble(1, 10000, {1.0, 100});
    const auto c = scalar(zero(), 1.0, 0.0, zero(), [](double x) { return x; });
    forward_pass(c, e, nullptr);
    backward_pass(c, e, nullptr);
    // Per-node RMS deviation over particles, worst node. Pointwise maxima are
    // dominated by extrapolation of the quadratic basis in the far tails.
    double dy = 0, dz = 0, dz0 = 0;
    for (int j = 0; j < 100; ++j) {
      double sy = 0, sz = 0, sz0 = 0;
      for (int i = 0; i < 10000; ++i) {
        sy += std::pow(e.y(j, 0, i)[0] - e.x(j, 0, i)[0], 2);
        sz += std::pow(e.z(j, 0, i)(0, 0) - 1.0, 2);
        sz0 += std::pow(e.z0(j, 0, i)(0, 0), 2);
      }
      dy = std::max(dy, std::sqrt(sy / 10000));
      dz = std::max(dz, std::sqrt(sz / 10000));
      dz0 = std::max(dz0, std::sqrt(sz0 / 10000));
    }
    CHECK(dy <= 5e-2);
    CHECK(dz <= 5e-2);
    CHECK(dz0 <= 5e-2);
  }

  TEST_CASE("constant terminal value") {
    PathEnsemble e = ensemble(4, 50, {1.0, 20});
    const auto c = scalar(zero(), 0.5, 0.2, zero(), [](double) { return 3.0; });
    forward_pass(c, e, nullptr);
    backward_pass(c, e, nullptr);
    for (std::size_t k = 0; k < e.Y.size(); ++k) CHECK(std::abs(e.Y[k] - 3.0) <= 1e-10);
    for (std::size_t k = 0; k < e.Z.size(); ++k) CHECK(std::abs(e.Z[k]) <= 1e-10);
  }

  TEST_CASE("coupled linear system against its Riccati equation") {
    // dX = -Y dt + 0.5 dW, -dY = X dt - Z dW, Y_T = 0: Y = P X with P' = P^2 - 1.
    LQParams p = testing::default_lq();
    p.f_cost = p.g_cost = 0.0;
    const double P0 = solve_riccati_single_agent(p).p_at(0);
    CHECK(P0 == doctest::Approx(std::tanh(1.0)).epsilon(1e-8));
    PathEnsemble e = ensemble(1, 4000, {1.0, 100});
    const auto c = scalar([](double, double, double y) { return -y; }, 0.5, 0.0,
                          [](double, double x, double) { return x; }, [](double) { return 0.0; });
    DecouplingMaps maps;
    continuation_solve(c, e, nullptr, SolverConfig{}, maps);
    double y0 = 0;
    for (int i = 0; i < 4000; ++i) y0 += e.y(0, 0, i)[0];
    y0 /= 4000;
    CHECK(std::abs(y0 / (P0 * 2.0) - 1.0) <= 0.01);
  }

  TEST_CASE("decoupled system converges in two Picard sweeps") {
    PathEnsemble e = ensemble(2, 200, {1.0, 20});
    const auto c = scalar([](double, double x, double) { return -x; }, 0.5, 0.2,
                          [](double, double x, double) { return x; }, [](double x) { return x; });
    const SolveLog log = picard_solve(c, e, nullptr, [] {
      SolverConfig s;
      s.picard_damping = 1.0;
      return s;
    }());
    CHECK(log.converged);
    CHECK(log.sweeps == 2);
    CHECK(log.residuals.back() == 0.0);
  }

  TEST_CASE("base homotopy system") {
    // delta = 0: dX = -Y dt - Z dW - Z0 dW0, -dY = X dt - ..., Y_T = X_T.
    // With deterministic xi the means solve x' = -y, y' = -x, y(T) = x(T),
    // whose solution is x = y = xi e^{-t}; hence Y_0 = xi.
    const auto base = scalar([](double, double x, double) { return std::sin(x); }, 0.5, 0.2,
                             [](double, double x, double) { return x * x; }, [](double x) { return x; });
    const FbsdeCoefficients h = homotopy_coefficients(base, 0.0);
    PathEnsemble e = ensemble(1, 2000, {1.0, 100}, 1.5, 0.0);
    const SolveLog log = picard_solve(h, e, nullptr, SolverConfig{});
    CHECK(log.converged);
    double y0 = 0;
    for (int i = 0; i < 2000; ++i) y0 += e.y(0, 0, i)[0];
    CHECK(std::abs(y0 / 2000 / 1.5 - 1.0) <= 0.01);
  }

  TEST_CASE("homotopy at delta = 1 is the target") {
    const auto base = scalar([](double, double x, double) { return std::sin(x); }, 0.5, 0.2,
                             [](double, double x, double) { return x * x; }, [](double x) { return x; });
    const FbsdeCoefficients h = homotopy_coefficients(base, 1.0);
    const EmpiricalMeasure m(vec1(0));
    const Mat z = Mat::Constant(1, 1, 0.3);
    CHECK(h.drift(0.1, vec1(0.4), vec1(1), z, z, m)[0] == std::sin(0.4));
    CHECK(h.driver(0.1, vec1(0.4), vec1(1), z, z, m)[0] == 0.4 * 0.4);
  }

  TEST_CASE("continuation and Picard agree on a contractive instance") {
    const auto c = scalar([](double, double, double y) { return -y; }, 0.5, 0.2,
                          [](double, double x, double) { return x; }, [](double x) { return 0.5 * x; });
    SolverConfig cfg;
    cfg.picard_tol = 1e-10;
    cfg.picard_max_iters = 400;
    cfg.eta = 1.0;
    PathEnsemble a = ensemble(4, 64, {0.5, 25}), b = a;
    picard_solve(c, a, nullptr, cfg);
    DecouplingMaps maps;
    continuation_solve(c, b, nullptr, cfg, maps);
    CHECK(sup_change(a, b) <= 1e-6);
  }

  TEST_CASE("residual diagnostics") {
    const auto c = scalar([](double, double x, double) { return -x; }, 0.5, 0.2,
                          [](double, double x, double) { return x; }, [](double x) { return x; });
    PathEnsemble e = ensemble(2, 100, {1.0, 20});
    forward_pass(c, e, nullptr);
    backward_pass(c, e, nullptr);
    const ResidualReport r = residual_diagnostics(c, e, nullptr);
    CHECK(r.forward_residual <= 1e-12);
    CHECK(r.terminal_defect == 0.0);
    PathEnsemble twin = ensemble(2, 100, {1.0, 20});
    forward_pass(c, twin, nullptr);
    backward_pass(c, twin, nullptr);
    for (double v : coupled_diagnostic(e, twin)) CHECK(v == 0.0);
    CHECK(sup_change(e, twin) == 0.0);
  }

  TEST_CASE("blown-up Picard iterates are reported") {
    // Strong forward-backward feedback over a long horizon.
    const auto c = scalar([](double, double, double y) { return 4.0 * y; }, 0.5, 0.2,
                          [](double, double x, double) { return 4.0 * x; }, [](double x) { return 4.0 * x; });
    PathEnsemble e = ensemble(2, 64, {5.0, 50});
    SolverConfig cfg;
    cfg.picard_damping = 1.0;
    CHECK_THROWS_AS(picard_solve(c, e, nullptr, cfg), MfgError);
  }

  TEST_CASE("solver configuration is validated") {
    SolverConfig cfg;
    cfg.picard_damping = 0.0;
    CHECK_THROWS_AS(cfg.validate(), MfgError);
    cfg = SolverConfig{};
    cfg.picard_tol = -1;
    CHECK_THROWS_AS(cfg.validate(), MfgError);
    cfg = SolverConfig{};
    cfg.eta = 1.5;
    CHECK_THROWS_AS(cfg.validate(), MfgError);
  }

  TEST_CASE("basis layout") {
    CHECK(basis_size(1) == 5);
    CHECK(basis_size(2) == 9);
    double row[5];
    const double x = 2.0;
    basis_row(&x, vec1(3.0), 1, row);
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 2.0);
    CHECK(row[2] == 4.0);
    CHECK(row[3] == 3.0);
    CHECK(row[4] == 9.0);
  }
}
