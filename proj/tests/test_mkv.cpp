#include "doctest.h"
#include "mfg/mkv.hpp"
#include "mfg/riccati.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace mfg;

namespace {

struct Small {
  LQParams p = testing::default_lq();
  MfeSolution sol = solve_mkv(make_lq(p), {1.0, 40}, {16, 128}, SolverConfig{});
};

const Small& small() {
  static const Small s;
  return s;
}

double y0_mean(const PathEnsemble& e) {
  double s = 0;
  for (int p = 0; p < e.paths(); ++p)
    for (int i = 0; i < e.particles(); ++i) s += e.y(0, p, i)[0];
  return s / (e.paths() * e.particles());
}

}  // namespace

TEST_SUITE("mkv") {
  TEST_CASE("small LQ instance agrees with the Riccati oracle") {
    const Small& s = small();
    const RiccatiSolution ric = solve_riccati_mfe(s.p);
    // Coarse grid: the O(dt) discretization bias dominates the tolerance.
    CHECK(std::abs(y0_mean(s.sol.ensemble) / riccati_y0_mean(s.p, ric)[0] - 1) <= 0.05);
    const CostEstimate c = mfe_cost(s.sol);
    CHECK(std::abs(c.mean / riccati_mfe_cost(s.p, ric) - 1) <= 0.05);
    CHECK(c.stderr_ > 0);
    CHECK(s.sol.outer_iterations >= 1);
  }

  TEST_CASE("controls match Y through the minimizer") {
    const Small& s = small();
    const PathEnsemble& e = s.sol.ensemble;
    for (int j = 0; j < 40; j += 10)
      for (int i = 0; i < 128; i += 17) CHECK(s.sol.alpha(j, 3, i)[0] == doctest::Approx(-e.y(j, 3, i)[0]).epsilon(1e-12));
  }

  TEST_CASE("drift-control residual is small") { CHECK(drift_control_residual(small().sol) <= 5e-2); }

  TEST_CASE("zero costs give the zero control") {
    LQParams p = testing::default_lq();
    p.q = p.f_cost = p.g_cost = 0.0;
    const MfeSolution sol = solve_mkv(make_lq(p), {1.0, 10}, {4, 32}, SolverConfig{});
    for (double a : sol.control) CHECK(std::abs(a) <= 1e-12);
    CHECK(sol.outer_iterations == 1);
    const CostEstimate c = mfe_cost(sol);
    CHECK(std::abs(c.mean) <= 1e-12);
  }

  TEST_CASE("without common noise every path follows the mean equation") {
    LQParams p = testing::default_lq();
    p.Sigma0.setZero();
    const MfeSolution sol = solve_mkv(make_lq(p), {1.0, 50}, {8, 256}, SolverConfig{});
    // Deterministic mean ODE value x(1) from the independent oracle.
    constexpr double kMeanT = 1.296108547328;
    double spread_lo = 1e9, spread_hi = -1e9, avg = 0;
    for (int q = 0; q < 8; ++q) {
      const double m = sol.flow.at(50, q).mean()[0];
      spread_lo = std::min(spread_lo, m);
      spread_hi = std::max(spread_hi, m);
      avg += m / 8;
    }
    CHECK(std::abs(avg - kMeanT) <= 0.03);
    CHECK(spread_hi - spread_lo <= 0.2);
  }

  TEST_CASE("a single copy with stream 0 reproduces particle 0") {
    const Small& s = small();
    const PathEnsemble c = conditionally_independent_copies(s.sol, 1, {0});
    for (int j = 0; j <= 40; ++j)
      for (int p = 0; p < 16; ++p) CHECK(c.x(j, p, 0)[0] == s.sol.ensemble.x(j, p, 0)[0]);
  }

  TEST_CASE("permuting stream ids permutes the copies") {
    const Small& s = small();
    const PathEnsemble a = conditionally_independent_copies(s.sol, 2, {900, 901});
    const PathEnsemble b = conditionally_independent_copies(s.sol, 2, {901, 900});
    for (int j = 0; j <= 40; ++j)
      for (int p = 0; p < 16; ++p) {
        CHECK(a.x(j, p, 0)[0] == b.x(j, p, 1)[0]);
        CHECK(a.x(j, p, 1)[0] == b.x(j, p, 0)[0]);
      }
  }

  TEST_CASE("path costs average to the cost estimate") {
    const Small& s = small();
    const std::vector<double> pc = path_costs(s.sol.spec, s.sol.ensemble, s.sol.control, &s.sol.flow);
    REQUIRE(pc.size() == 16);
    double m = 0;
    for (double v : pc) m += v / 16;
    CHECK(m == doctest::Approx(mfe_cost(s.sol).mean).epsilon(1e-12));
  }

  TEST_CASE("resimulating under the equilibrium control reproduces the states") {
    const Small& s = small();
    const PathEnsemble r = resimulate(s.sol.spec, s.sol.ensemble, s.sol.control, &s.sol.flow);
    double err = 0;
    for (std::size_t k = 0; k < r.X.size(); ++k) err = std::max(err, std::abs(r.X[k] - s.sol.ensemble.X[k]));
    CHECK(err <= 1e-12);
  }

  TEST_CASE("binary round trip") {
    const Small& s = small();
    std::stringstream buf;
    s.sol.write(buf);
    const MfeData d = read_mfe(buf);
    CHECK(d.ensemble.X == s.sol.ensemble.X);
    CHECK(d.ensemble.Y == s.sol.ensemble.Y);
    CHECK(d.ensemble.Z0 == s.sol.ensemble.Z0);
    CHECK(d.control == s.sol.control);
    CHECK(d.outer_iterations == s.sol.outer_iterations);
    CHECK(d.r == 0.0);
  }

  TEST_CASE("truncated input is rejected") {
    std::stringstream buf;
    small().sol.write(buf);
    std::string bytes = buf.str();
    bytes.resize(bytes.size() / 2);
    std::stringstream cut(bytes);
    CHECK_THROWS_AS(read_mfe(cut), MfgError);
  }
}
