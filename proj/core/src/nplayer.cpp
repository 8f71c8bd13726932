#include "mfg/nplayer.hpp"

#include "mfg/mkv.hpp"
#include "mfg/parallel.hpp"
#include "mfg/riccati.hpp"
#include "mfg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mfg {

namespace {

constexpr std::uint32_t kPlayerStreamBase = 1u << 24;

Vec control_at(const std::vector<double>& control, std::size_t entry, int k) {
  return Eigen::Map<const Eigen::VectorXd>(&control[entry * k], k);
}

HamiltonianPoint point(const Vec& x, const Vec& y, const Mat& z, const Mat& z0, const EmpiricalMeasure& m) {
  return HamiltonianPoint{x, y, z, z0, &m};
}

}  // namespace

FbsdeCoefficients nplayer_coefficients(const GameSpec& spec, int N) {
  if (N < 1) throw MfgError(ErrorCode::InvalidParams, "need at least one player");
  FbsdeCoefficients c = mkv_coefficients(spec);
  const double inv = 1.0 / N;
  c.driver = [spec, inv](double, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                         const EmpiricalMeasure& m) {
    const HamiltonianPoint p = point(x, y, z, z0, m);
    return Vec(hamiltonian_derivatives(spec, p).Dx + inv * hamiltonian_Dm(spec, p, x));
  };
  c.terminal = [spec, inv](const Vec& x, const EmpiricalMeasure& m) {
    return Vec(spec.DxG(x, m) + inv * spec.DmG(x, m, x));
  };
  return c;
}

std::vector<std::uint32_t> player_stream_ids(int N) {
  std::vector<std::uint32_t> ids(N);
  for (int i = 0; i < N; ++i) ids[i] = kPlayerStreamBase + static_cast<std::uint32_t>(i);
  return ids;
}

Vec NPlayerSolution::alpha(int node, int trial, int player) const {
  return control_at(control, ensemble.entry(node, trial, player), spec.dims.k);
}

std::vector<double> nplayer_control(const GameSpec& spec, const PathEnsemble& e) {
  const int k = spec.dims.k, N = e.particles();
  std::vector<double> control(static_cast<std::size_t>(e.nodes()) * e.paths() * N * k);
  parallel_for(e.paths(), [&](int p) {
    for (int j = 0; j < e.nodes(); ++j) {
      const EmpiricalMeasure m(e.slice(j, p));
      for (int i = 0; i < N; ++i) {
        const Vec a = minimizer_alpha(spec, point(e.x(j, p, i), e.y(j, p, i), e.z(j, p, i), e.z0(j, p, i), m));
        std::copy(a.data(), a.data() + k, &control[e.entry(j, p, i) * k]);
      }
    }
  });
  return control;
}

namespace {

double offdiag_diagnostic(const FbsdeCoefficients& coeffs, const PathEnsemble& e) {
  const int n = e.dims().n, d = e.dims().d, N = e.particles(), J = e.grid().steps;
  const double dt = e.grid().dt();
  std::vector<double> per_path(e.paths(), 0.0);
  parallel_for(e.paths(), [&](int p) {
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
      const EmpiricalMeasure m(e.slice(j, p));
      const double t = e.grid().t(j);
      const Eigen::Map<const Eigen::VectorXd> dw0(e.dw0_data(j, p), d);
      for (int i = 0; i < N; ++i) {
        const Vec x = e.x(j, p, i), y = e.y(j, p, i);
        const Mat z = e.z(j, p, i), z0 = e.z0(j, p, i);
        const Eigen::Map<const Eigen::VectorXd> dw(e.dw_data(j, p, i), d);
        Vec drift = coeffs.driver(t, x, y, z, z0, m);
        if (coeffs.r != 0.0) drift -= coeffs.r * y;
        const Vec explained = z * dw + z0 * dw0;
        const Vec unexplained = e.y(j + 1, p, i) - y + drift * dt - explained;
        total += unexplained.squaredNorm();
      }
    }
    per_path[p] = total / (static_cast<double>(N) * J * dt * n);
  });
  return mean_se(per_path).mean;
}

}  // namespace

NPlayerSolution solve_nplayer(const GameSpec& spec, int N, const TimeGrid& grid, int trials,
                              const SolverConfig& config) {
  spec.validate();
  grid.validate();
  config.validate();
  if (N < 1 || trials < 1) throw MfgError(ErrorCode::InvalidParams, "players and trials must be positive");
  NPlayerSolution sol;
  sol.spec = spec;
  sol.N = N;
  sol.seed = config.seed;
  const NoiseStreams streams(config.seed);
  sol.ensemble = PathEnsemble::sample(spec.dims, grid, {trials, N}, streams, spec.m0, player_stream_ids(N));
  const std::vector<double> zero(static_cast<std::size_t>(grid.nodes()) * trials * N * spec.dims.k, 0.0);
  sol.ensemble.X = resimulate(spec, sol.ensemble, zero, nullptr).X;

  const FbsdeCoefficients coeffs = nplayer_coefficients(spec, N);
  if (config.method == SolverMethod::Continuation) {
    sol.log = continuation_solve(coeffs, sol.ensemble, nullptr, config, sol.maps);
  } else {
    sol.log = picard_solve(coeffs, sol.ensemble, nullptr, config, &sol.maps);
    forward_pass_feedback(coeffs, sol.ensemble, sol.maps, nullptr);
  }
  sol.control = nplayer_control(spec, sol.ensemble);
  sol.offdiag_residual = offdiag_diagnostic(coeffs, sol.ensemble);
  return sol;
}

std::vector<double> player_costs(const GameSpec& spec, const PathEnsemble& base, const std::vector<double>& control,
                                 int player) {
  if (player < 0 || player >= base.particles()) throw MfgError(ErrorCode::IndexOutOfRange, "no such player");
  const PathEnsemble e = resimulate(spec, base, control, nullptr);
  const int k = spec.dims.k, J = e.grid().steps;
  const double dt = e.grid().dt();
  std::vector<double> out(e.paths(), 0.0);
  parallel_for(e.paths(), [&](int p) {
    double total = 0.0;
    for (int j = 0; j <= J; ++j) {
      const EmpiricalMeasure m(e.slice(j, p));
      const double weight = spec.r > 0 ? std::exp(-spec.r * e.grid().t(j)) : 1.0;
      const Vec x = e.x(j, p, player);
      if (j < J) {
        total += weight * spec.L(x, control_at(control, e.entry(j, p, player), k), m) * dt;
      } else {
        total += weight * spec.G(x, m);
      }
    }
    out[p] = total;
  });
  return out;
}

DeviationReport nash_deviation_check(const NPlayerSolution& sol, int player, int perturbations, double eps,
                                     std::uint64_t rng_seed) {
  const GameSpec& spec = sol.spec;
  const PathEnsemble& e = sol.ensemble;
  const int k = spec.dims.k, J = e.grid().steps;
  const double T = e.grid().T;
  const std::vector<double> base = player_costs(spec, e, sol.control, player);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal;
  DeviationReport report;
  report.player = player;
  for (int q = 0; q < perturbations; ++q) {
    Vec dir(k);
    for (int a = 0; a < k; ++a) dir[a] = normal(rng);
    dir.normalize();
    double c[3];
    for (double& v : c) v = normal(rng);
    auto shape = [&](double t) {
      double s = 0.0;
      for (int m = 0; m < 3; ++m) s += c[m] * std::cos(m * std::numbers::pi * t / T);
      return s;
    };
    double sup = 0.0;
    for (int j = 0; j < J; ++j) sup = std::max(sup, std::abs(shape(e.grid().t(j))));
    if (sup == 0.0) sup = 1.0;

    std::vector<double> control = sol.control;
    for (int j = 0; j < J; ++j) {
      const Vec shift = eps * shape(e.grid().t(j)) / sup * dir;
      for (int p = 0; p < e.paths(); ++p) {
        double* a = &control[e.entry(j, p, player) * k];
        for (int c2 = 0; c2 < k; ++c2) a[c2] += shift[c2];
      }
    }
    const std::vector<double> moved = player_costs(spec, e, control, player);
    std::vector<double> diff(moved.size());
    for (std::size_t p = 0; p < moved.size(); ++p) diff[p] = moved[p] - base[p];
    const MeanSe s = mean_se(diff);
    report.diffs.push_back(s.mean);
    report.stderrs.push_back(s.se);
    if (q == 0 || s.mean < report.min_diff) {
      report.min_diff = s.mean;
      report.min_stderr = s.se;
    }
    if (s.mean < -report.tolerance_se * s.se - 1e-14) report.pass = false;
  }
  return report;
}

ExchangeabilityReport exchangeability_check(const NPlayerSolution& sol, const PathEnsemble& copies,
                                            const std::vector<double>& copy_control) {
  const PathEnsemble& e = sol.ensemble;
  if (copies.paths() != e.paths() || copies.particles() != e.particles() || copies.nodes() != e.nodes() ||
      copy_control.size() != sol.control.size()) {
    throw MfgError(ErrorCode::SizeMismatch, "copies must match the N-player layout");
  }
  const int N = e.particles(), P = e.paths(), J = e.grid().steps, k = sol.spec.dims.k;
  const double dt = e.grid().dt();
  ExchangeabilityReport r;
  r.state_err.resize(N);
  r.state_se.resize(N);
  r.control_err.resize(N);
  r.control_se.resize(N);
  for (int i = 0; i < N; ++i) {
    std::vector<double> sx(P, 0.0), sa(P, 0.0);
    for (int p = 0; p < P; ++p) {
      for (int j = 0; j <= J; ++j) {
        sx[p] = std::max(sx[p], (e.x(j, p, i) - copies.x(j, p, i)).squaredNorm());
        if (j < J) {
          const std::size_t at = e.entry(j, p, i);
          sa[p] += (control_at(sol.control, at, k) - control_at(copy_control, at, k)).squaredNorm() * dt;
        }
      }
    }
    const MeanSe ms = mean_se(sx), ma = mean_se(sa);
    r.state_err[i] = ms.mean;
    r.state_se[i] = ms.se;
    r.control_err[i] = ma.mean;
    r.control_se[i] = ma.se;
  }
  auto spread = [&](const std::vector<double>& v, const std::vector<double>& se, double& out) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    out = mean > 0 ? (*hi - *lo) / mean : 0.0;
    const double band = r.tolerance_se * std::hypot(se[lo - v.begin()], se[hi - v.begin()]);
    return *hi - *lo <= band + 1e-14;
  };
  const bool states = spread(r.state_err, r.state_se, r.state_spread);
  const bool controls = spread(r.control_err, r.control_se, r.control_spread);
  r.pass = states && controls;
  return r;
}

}  // namespace mfg
