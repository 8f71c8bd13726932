#include "doctest.h"
#include "mfg/ensemble.hpp"
#include "mfg/measure.hpp"
#include "mfg/random.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mfg;

namespace {

EmpiricalMeasure cloud(const Eigen::MatrixXd& atoms) { return EmpiricalMeasure(atoms); }

Eigen::MatrixXd random_cloud(NormalStream& s, int n, int N) {
  Eigen::MatrixXd a(n, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = s.next();
  return a;
}

// Exhaustive search over all N! assignments.
double brute_force_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<int> perm(a.cols());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0.0;
    for (int i = 0; i < a.cols(); ++i) c += (a.col(i) - b.col(perm[i])).squaredNorm();
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / a.cols());
}

}  // namespace

TEST_SUITE("measure") {
  TEST_CASE("mean and moments") {
    Eigen::MatrixXd a(1, 2);
    a << 1, -1;
    const EmpiricalMeasure m(a);
    CHECK(m.mean()[0] == 0.0);
    CHECK(moment(m, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(moment(EmpiricalMeasure(testing::vec({0.0})), 3.5) == 0.0);
    CHECK(moment(EmpiricalMeasure(testing::vec({3.0, 4.0})), 2) == doctest::Approx(25.0).epsilon(1e-15));
  }

  TEST_CASE("with_atom replaces one atom") {
    Eigen::MatrixXd a(1, 3);
    a << 1, 2, 3;
    const EmpiricalMeasure m = EmpiricalMeasure(a).with_atom(1, testing::vec1(5.0));
    CHECK(m.atom(1)[0] == 5.0);
    CHECK(m.mean()[0] == doctest::Approx(3.0).epsilon(1e-15));
  }

  TEST_CASE("w2 identities") {
    NormalStream s = NoiseStreams(1).auxiliary(0, 0);
    const Eigen::MatrixXd a = random_cloud(s, 2, 7);
    CHECK(w2(cloud(a), cloud(a)) == doctest::Approx(0.0));
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 2), c = Eigen::MatrixXd::Constant(1, 2, -1.7);
    CHECK(w2(cloud(z), cloud(c)) == doctest::Approx(1.7).epsilon(1e-15));
    CHECK(w2_assignment(cloud(z), cloud(c)) == doctest::Approx(1.7).epsilon(1e-15));
  }

  TEST_CASE("assignment equals brute force on 6-atom clouds") {
    NormalStream s = NoiseStreams(2).auxiliary(0, 0);
    for (int trial = 0; trial < 25; ++trial) {
      const Eigen::MatrixXd a = random_cloud(s, 2, 6), b = random_cloud(s, 2, 6);
      const double exact = brute_force_w2(a, b);
      CHECK(std::abs(w2_assignment(cloud(a), cloud(b)) - exact) <= 1e-12);
      CHECK(std::abs(w2(cloud(a), cloud(b)) - exact) <= 1e-12);
    }
  }

  TEST_CASE("sorting and assignment agree in one dimension") {
    NormalStream s = NoiseStreams(3).auxiliary(0, 0);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd a = random_cloud(s, 1, 40), b = random_cloud(s, 1, 40);
      CHECK(w2(cloud(a), cloud(b)) == doctest::Approx(w2_assignment(cloud(a), cloud(b))).epsilon(1e-12));
    }
  }

  TEST_CASE("w2 is a metric on samples") {
    NormalStream s = NoiseStreams(4).auxiliary(0, 0);
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = cloud(random_cloud(s, 3, 8)), b = cloud(random_cloud(s, 3, 8)), c = cloud(random_cloud(s, 3, 8));
      CHECK(w2(a, b) == doctest::Approx(w2(b, a)).epsilon(1e-12));
      CHECK(w2(a, c) <= w2(a, b) + w2(b, c) + 1e-12);
    }
  }

  TEST_CASE("assignment returns a permutation") {
    Eigen::MatrixXd cost(3, 3);
    cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const std::vector<int> col = solve_assignment(cost);
    CHECK(col == std::vector<int>{1, 0, 2});
  }

  TEST_CASE("chaos_wasserstein") {
    Eigen::MatrixXd a(2, 4), b(2, 4);
    a << 0, 1, 2, 3, 4, 5, 6, 7;
    CHECK(chaos_wasserstein({a}, {a}, 4) == 0.0);
    b = a.array() + 0.5;
    CHECK(chaos_wasserstein({a}, {b}, 4) == doctest::Approx(0.25 * 2).epsilon(1e-15));
    // k = 2 uses the first two particles only: (|d_0|^2 + |d_1|^2) / 2.
    b = a;
    b(0, 0) += 1.0;
    b(1, 1) += 2.0;
    b(0, 3) += 10.0;
    CHECK(chaos_wasserstein({a}, {b}, 2) == doctest::Approx((1.0 + 4.0) / 2).epsilon(1e-15));
  }

  TEST_CASE("conditional law is the particle slice") {
    const LQParams p = testing::default_lq();
    const PathEnsemble e = PathEnsemble::sample({1, 1, 1}, {1.0, 4}, {3, 1}, NoiseStreams(1),
                                                gaussian_sampler(p.mu0, p.Lambda0));
    const EmpiricalMeasure m = conditional_law(e, 0, 2);
    CHECK(m.size() == 1);
    CHECK(m.atom(0)[0] == e.x(0, 2, 0)[0]);
    CHECK_THROWS_AS(conditional_law(e, 5, 0), MfgError);
    CHECK_THROWS_AS(conditional_law(e, 0, 3), MfgError);
  }
}
