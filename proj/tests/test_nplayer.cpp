#include "doctest.h"
#include "mfg/mkv.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/riccati.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace mfg;

namespace {

constexpr int kSteps = 50;
constexpr int kTrials = 32;

// Sup over entries of |X - X_oracle| relative to sup |X_oracle|.
double relative_state_error(const NPlayerSolution& sol, const LQParams& p) {
  PathEnsemble o = sol.ensemble;
  oracle_paths_inplace(solve_riccati_nplayer(p, sol.N), p, o);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < o.X.size(); ++k) {
    num = std::max(num, std::abs(o.X[k] - sol.ensemble.X[k]));
    den = std::max(den, std::abs(o.X[k]));
  }
  return num / den;
}

struct Coupled {
  LQParams p = testing::default_lq();
  int N = 4;
  NPlayerSolution game = solve_nplayer(make_lq(p), N, {1.0, kSteps}, kTrials, SolverConfig{});
  MfeSolution mfe = solve_mkv(make_lq(p), {1.0, kSteps}, {kTrials, 128}, SolverConfig{});
  PathEnsemble copies = conditionally_independent_copies(mfe, N, player_stream_ids(N));
  std::vector<double> copy_control = extract_control(mfe.spec, copies, mfe.flow);
};

const Coupled& coupled() {
  static const Coupled c;
  return c;
}

}  // namespace

TEST_SUITE("nplayer") {
  TEST_CASE("player streams are disjoint from flow particles") {
    const auto ids = player_stream_ids(3);
    REQUIRE(ids.size() == 3);
    CHECK(ids[1] == ids[0] + 1);
    CHECK(ids[0] >= 1u << 20);
  }

  TEST_CASE("players and their copies start from the same state") {
    const Coupled& c = coupled();
    for (int p = 0; p < kTrials; ++p)
      for (int i = 0; i < c.N; ++i) CHECK(c.game.ensemble.x(0, p, i)[0] == c.copies.x(0, p, i)[0]);
  }

  TEST_CASE("two players against the Riccati oracle") {
    const LQParams p = testing::default_lq();
    const NPlayerSolution sol = solve_nplayer(make_lq(p), 2, {1.0, kSteps}, kTrials, SolverConfig{});
    CHECK(relative_state_error(sol, p) <= 0.03);
  }

  TEST_CASE("one player reduces to the single-agent oracle") {
    const LQParams p = testing::default_lq();
    const NPlayerSolution sol = solve_nplayer(make_lq(p), 1, {1.0, kSteps}, kTrials, SolverConfig{});
    CHECK(relative_state_error(sol, p) <= 0.03);
  }

  TEST_CASE("Nash deviation check passes at equilibrium") {
    const DeviationReport r = nash_deviation_check(coupled().game, 0, 8);
    CHECK(r.diffs.size() == r.stderrs.size());
    CHECK(r.pass);
  }

  TEST_CASE("Nash deviation check rejects an inflated control") {
    NPlayerSolution bad = coupled().game;
    for (double& a : bad.control) a *= 1.5;
    const DeviationReport r = nash_deviation_check(bad, 0, 8);
    CHECK_FALSE(r.pass);
    CHECK(r.min_diff < -r.tolerance_se * r.min_stderr);
  }

  TEST_CASE("players are exchangeable") {
    const Coupled& c = coupled();
    const ExchangeabilityReport r = exchangeability_check(c.game, c.copies, c.copy_control);
    CHECK(r.state_err.size() == static_cast<std::size_t>(c.N));
    CHECK(r.pass);
  }

  TEST_CASE("a single player has zero spread") {
    const LQParams p = testing::default_lq();
    const NPlayerSolution sol = solve_nplayer(make_lq(p), 1, {1.0, 20}, 8, SolverConfig{});
    const MfeSolution mfe = solve_mkv(make_lq(p), {1.0, 20}, {8, 64}, SolverConfig{});
    const PathEnsemble copies = conditionally_independent_copies(mfe, 1, player_stream_ids(1));
    const ExchangeabilityReport r = exchangeability_check(sol, copies, extract_control(mfe.spec, copies, mfe.flow));
    CHECK(r.state_spread == 0.0);
    CHECK(r.control_spread == 0.0);
    CHECK(r.pass);
  }

  TEST_CASE("a copy driven by the wrong stream breaks exchangeability") {
    const Coupled& c = coupled();
    std::vector<std::uint32_t> ids = player_stream_ids(c.N);
    ids[0] = 7;
    const PathEnsemble bad = conditionally_independent_copies(c.mfe, c.N, ids);
    const ExchangeabilityReport r = exchangeability_check(c.game, bad, extract_control(c.mfe.spec, bad, c.mfe.flow));
    CHECK_FALSE(r.pass);
  }

  TEST_CASE("without interaction the players decouple") {
    LQParams p = testing::default_lq();
    p.f_cost = p.rho = p.g_cost = 0.0;
    const NPlayerSolution sol = solve_nplayer(make_lq(p), 4, {1.0, kSteps}, 16, SolverConfig{});
    // Every player solves the same control problem: the MFE and N-player
    // Riccati solutions coincide.
    const RiccatiSolution ric = solve_riccati_mfe(p);
    PathEnsemble o = sol.ensemble;
    oracle_paths_inplace(ric, p, o);
    double num = 0, den = 0;
    for (std::size_t k = 0; k < o.X.size(); ++k) {
      num = std::max(num, std::abs(o.X[k] - sol.ensemble.X[k]));
      den = std::max(den, std::abs(o.X[k]));
    }
    CHECK(num / den <= 0.02);
    CHECK(relative_state_error(sol, p) == doctest::Approx(num / den).epsilon(1e-6));
  }

  TEST_CASE("player costs are finite and positive") {
    const Coupled& c = coupled();
    const std::vector<double> costs = player_costs(c.game.spec, c.game.ensemble, c.game.control, 1);
    REQUIRE(costs.size() == static_cast<std::size_t>(kTrials));
    for (double v : costs) CHECK(v > 0);
  }
}
