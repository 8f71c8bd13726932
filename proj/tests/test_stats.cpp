#include "doctest.h"
#include "mfg/stats.hpp"
#include "mfg/types.hpp"

#include <cmath>

using namespace mfg;

TEST_SUITE("stats") {
  TEST_CASE("mean and standard error") {
    const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-14));
    CHECK(mean_se({7.0}).se == 0.0);
  }

  TEST_CASE("exact line") {
    const LinearFit f = ols({0, 1, 2, 3}, {1, -1, -3, -5});
    CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("slope standard error") {
    // Residuals +-0.1 alternate: rss = 0.04, sxx = 5, se = sqrt(0.04 / 2 / 5).
    const LinearFit f = ols({0, 1, 2, 3}, {0.1, 0.9, 2.1, 2.9});
    CHECK(f.slope == doctest::Approx(0.96).epsilon(1e-12));
    const double rss = [&] {
      double s = 0;
      const double xs[] = {0, 1, 2, 3}, ys[] = {0.1, 0.9, 2.1, 2.9};
      for (int i = 0; i < 4; ++i) s += std::pow(ys[i] - f.intercept - f.slope * xs[i], 2);
      return s;
    }();
    CHECK(f.slope_se == doctest::Approx(std::sqrt(rss / 2 / 5)).epsilon(1e-12));
  }

  TEST_CASE("degenerate inputs") {
    CHECK_THROWS_AS(ols({1, 1}, {0, 1}), MfgError);
    CHECK_THROWS_AS(ols({1, 2}, {0}), MfgError);
  }
}
