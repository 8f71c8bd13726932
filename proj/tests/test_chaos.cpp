#include "doctest.h"
#include "mfg/chaos.hpp"
#include "mfg/parallel.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace mfg;

namespace {

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

ChaosStudyResult small_study(const LQParams& p, const std::vector<int>& Ns, ChaosOptions opt = {}) {
  opt.mfe_particles = 64;
  return run_chaos_study(make_lq(p), Ns, 4, {1.0, 20}, SolverConfig{}, opt);
}

}  // namespace

TEST_SUITE("chaos") {
  TEST_CASE("rate function values") {
    CHECK(rnq(3, 3.0, 100) == doctest::Approx(0.315443).epsilon(1e-6));
    CHECK(rnq(4, 3.0, 1) == doctest::Approx(1.693147).epsilon(1e-6));
    CHECK(rnq(5, 3.0, 32) == doctest::Approx(0.426777).epsilon(1e-6));
    CHECK(rnq(1, 4.0, 16) == doctest::Approx(0.25 + 0.25));
    CHECK_THROWS_AS(rnq(3, 2.0, 10), MfgError);
    CHECK_THROWS_AS(rnq(0, 3.0, 10), MfgError);
  }

  TEST_CASE("the rate decreases in N") {
    for (int n : {1, 3, 4, 6})
      for (int N = 1; N < 512; N *= 2) CHECK(rnq(n, 3.0, 2 * N) < rnq(n, 3.0, N));
  }

  TEST_CASE("error terms of the quadratic interaction in closed form") {
    const LQParams p = testing::default_lq();
    const MfeSolution mfe = solve_mkv(make_lq(p), {1.0, 10}, {2, 64}, SolverConfig{});
    const int N = 5;
    const PathEnsemble copies = conditionally_independent_copies(mfe, N, player_stream_ids(N));
    const std::vector<double> control = extract_control(mfe.spec, copies, mfe.flow);
    for (int path = 0; path < 2; ++path) {
      const ErrorTerms t = error_terms(mfe.spec, copies, control, mfe.flow, path);
      // D_xF = f (x - rho mean), D_mF(x, m, x) = -f rho (x - rho mean); same for G.
      double eF = 0, eG = 0;
      for (int j = 0; j <= 10; ++j) {
        double mN = 0;
        for (int i = 0; i < N; ++i) mN += copies.x(j, path, i)[0] / N;
        const double mbar = mfe.flow.at(j, path).mean()[0];
        for (int i = 0; i < N; ++i) {
          const double x = copies.x(j, path, i)[0];
          const double e = -(p.rho / N) * (x - p.rho * mN) + p.rho * (mbar - mN);
          (j == 10 ? eG : eF) += e * e;
        }
      }
      REQUIRE(t.F.has_value());
      REQUIRE(t.G.has_value());
      CHECK_FALSE(t.L.has_value());
      CHECK(*t.F == doctest::Approx(p.f_cost * p.f_cost * eF / (N * 10)).epsilon(1e-12));
      CHECK(*t.G == doctest::Approx(p.g_cost * p.g_cost * eG / N).epsilon(1e-12));
    }
  }

  TEST_CASE("coupled Lyapunov of identical ensembles vanishes") {
    const LQParams p = testing::default_lq();
    const MfeSolution mfe = solve_mkv(make_lq(p), {1.0, 10}, {2, 16}, SolverConfig{});
    for (double v : coupled_lyapunov(mfe.ensemble, mfe.ensemble)) CHECK(v == 0.0);
    const PathEnsemble other = conditionally_independent_copies(mfe, 3);
    CHECK_THROWS_AS(coupled_lyapunov(mfe.ensemble, other), MfgError);
  }

  TEST_CASE("study layout and CSV contract") {
    const ChaosStudyResult r = small_study(testing::default_lq(), {2, 4, 8});
    CHECK(r.aborted.empty());
    REQUIRE(r.rows.size() == 12);
    CHECK(r.rows[5].N == 4);
    CHECK(r.rows[5].trial == 1);
    REQUIRE(r.summary.size() == 3);
    REQUIRE(r.fit.has_value());
    CHECK(r.fit_eF.has_value());
    CHECK(r.flow_moments.size() == 3);
    CHECK(r.lyapunov.size() == 3);
    std::ostringstream rows, summary;
    r.write_csv(rows);
    r.write_summary_csv(summary);
    CHECK(rows.str().rfind("N,trial,sup_state_err,control_err,chaos_w2,eF_sq,eG_sq,", 0) == 0);
    CHECK(count_lines(rows.str()) == 13);
    CHECK(summary.str().rfind("N,mean_sup_state_err,stderr,fitted_slope,slope_stderr\n", 0) == 0);
    CHECK(count_lines(summary.str()) == 4);
  }

  TEST_CASE("a single ladder entry has no fit") {
    ChaosOptions opt;
    opt.error_terms = false;
    opt.chaos_w2 = false;
    const ChaosStudyResult r = small_study(testing::default_lq(), {4}, opt);
    CHECK_FALSE(r.fit.has_value());
    CHECK_FALSE(r.fit_eF.has_value());
    for (const ChaosRow& row : r.rows) {
      CHECK_FALSE(row.chaos_w2.has_value());
      CHECK_FALSE(row.terms.F.has_value());
    }
    std::ostringstream summary;
    r.write_summary_csv(summary);
    CHECK(summary.str().find("\n4,") != std::string::npos);
    CHECK(summary.str().substr(summary.str().size() - 3) == ",,\n");
  }

  TEST_CASE("results do not depend on the thread count") {
    const LQParams p = testing::default_lq();
    const int saved = thread_count();
    set_thread_count(1);
    std::ostringstream a;
    small_study(p, {2, 4}).write_csv(a);
    set_thread_count(8);
    std::ostringstream b;
    small_study(p, {2, 4}).write_csv(b);
    set_thread_count(saved);
    CHECK(a.str() == b.str());
  }

  TEST_CASE("without interaction the error terms vanish") {
    LQParams p = testing::default_lq();
    p.f_cost = p.rho = p.g_cost = 0.0;
    const ChaosStudyResult r = small_study(p, {2, 4});
    for (const ChaosRow& row : r.rows) {
      CHECK(*row.terms.F == 0.0);
      CHECK(*row.terms.G == 0.0);
      // Only the regression noise between the two solves remains; the
      // metric is squared, so this bounds the state gap near 0.1.
      CHECK(row.sup_state_err <= 1e-2);
    }
  }

  TEST_CASE("Riccati gap study") {
    const RiccatiGapStudy g = riccati_gap_study(testing::default_lq(), {8, 16, 32, 64});
    CHECK(g.gaps[0] == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(g.fit.slope == doctest::Approx(-1.0).epsilon(1e-6));
  }

  TEST_CASE("study arguments are validated") {
    CHECK_THROWS_AS(run_chaos_study(make_lq(testing::default_lq()), {}, 4, {1.0, 10}, SolverConfig{}), MfgError);
    CHECK_THROWS_AS(run_chaos_study(make_lq(testing::default_lq()), {4, 2}, 4, {1.0, 10}, SolverConfig{}), MfgError);
  }
}
