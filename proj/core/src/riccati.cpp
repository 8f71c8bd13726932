#include "mfg/riccati.hpp"

#include "mfg/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mfg {

namespace {

struct Coeffs {
  double c_l, r, kappa, rho;  // running weights: P' = P^2/c_l + rP - (q + kappa)
  double q;
};

double p_rhs(const Coeffs& c, double p) { return p * p / c.c_l + c.r * p - (c.q + c.kappa); }
double s_rhs(const Coeffs& c, double p, double s) {
  return c.kappa * c.rho + (p * s + s * (p + s)) / c.c_l + c.r * s;
}

void check_finite(double v) {
  if (!std::isfinite(v) || std::abs(v) > 1e8) {
    throw MfgError(ErrorCode::BlowUp, "Riccati solution escapes", v);
  }
}

RiccatiSolution integrate(const LQParams& P, const Coeffs& c, double pT, double sT, int N, int steps) {
  if (steps < 1) throw MfgError(ErrorCode::InvalidParams, "Riccati integration needs steps");
  RiccatiSolution sol;
  sol.n = P.n;
  sol.T = P.T;
  sol.r = P.r;
  sol.c_l = P.c_l;
  sol.N = N;
  sol.steps = steps;
  sol.p.assign(steps + 1, 0.0);
  sol.s.assign(steps + 1, 0.0);
  sol.dp.assign(steps + 1, 0.0);
  sol.ds.assign(steps + 1, 0.0);
  const double h = P.T / steps;
  double p = pT, s = sT;
  sol.p[steps] = p;
  sol.s[steps] = s;
  // Integrate in reversed time tau = T - t: dp/dtau = -p_rhs.
  for (int j = steps; j > 0; --j) {
    auto f = [&](double pp, double ss) { return std::pair{-p_rhs(c, pp), -s_rhs(c, pp, ss)}; };
    const auto [k1p, k1s] = f(p, s);
    const auto [k2p, k2s] = f(p + 0.5 * h * k1p, s + 0.5 * h * k1s);
    const auto [k3p, k3s] = f(p + 0.5 * h * k2p, s + 0.5 * h * k2s);
    const auto [k4p, k4s] = f(p + h * k3p, s + h * k3s);
    p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
    check_finite(p);
    check_finite(s);
    sol.p[j - 1] = p;
    sol.s[j - 1] = s;
  }
  for (int j = 0; j <= steps; ++j) {
    sol.dp[j] = p_rhs(c, sol.p[j]);
    sol.ds[j] = s_rhs(c, sol.p[j], sol.s[j]);
  }
  return sol;
}

double hermite(const std::vector<double>& v, const std::vector<double>& dv, int steps, double T, double t) {
  if (steps == 0) return v[0];  // stationary
  const double h = T / steps;
  const double u = std::clamp(t / h, 0.0, static_cast<double>(steps));
  int j = std::min(static_cast<int>(std::floor(u)), steps - 1);
  const double th = u - j;
  if (th == 0.0) return v[j];
  const double h00 = (1 + 2 * th) * (1 - th) * (1 - th), h10 = th * (1 - th) * (1 - th);
  const double h01 = th * th * (3 - 2 * th), h11 = th * th * (th - 1);
  return h00 * v[j] + h10 * h * dv[j] + h01 * v[j + 1] + h11 * h * dv[j + 1];
}

}  // namespace

double RiccatiSolution::p_at(double t) const { return hermite(p, dp, steps, T, t); }
double RiccatiSolution::s_at(double t) const { return hermite(s, ds, steps, T, t); }
Mat RiccatiSolution::P(double t) const { return p_at(t) * Mat::Identity(n, n); }
Mat RiccatiSolution::S(double t) const { return s_at(t) * Mat::Identity(n, n); }

RiccatiSolution solve_riccati_mfe(const LQParams& P, int steps) {
  P.validate(true);
  const Coeffs c{P.c_l, P.r, P.f_cost, P.rho, P.q};
  return integrate(P, c, P.g_cost, -P.g_cost * P.rho, 0, steps);
}

RiccatiSolution solve_riccati_nplayer(const LQParams& P, int N, int steps) {
  P.validate(true);
  if (N < 1) throw MfgError(ErrorCode::InvalidParams, "N must be at least 1");
  const double shrink = 1.0 - P.rho / N;
  const Coeffs c{P.c_l, P.r, P.f_cost * shrink, P.rho, P.q};
  const double gT = P.g_cost * shrink;
  return integrate(P, c, gT, -gT * P.rho, N, steps);
}

RiccatiSolution solve_riccati_single_agent(const LQParams& P, int steps) {
  P.validate(true);
  const double w = (1.0 - P.rho) * (1.0 - P.rho);
  const Coeffs c{P.c_l, P.r, P.f_cost * w, 0.0, P.q};
  return integrate(P, c, P.g_cost * w, 0.0, 1, steps);
}

RiccatiSolution solve_riccati_stationary(const LQParams& P, int N) {
  P.validate(true);
  const double shrink = N > 0 ? 1.0 - P.rho / N : 1.0;
  const Coeffs c{P.c_l, P.r, P.f_cost * shrink, P.rho, P.q};
  // Backward integration over unit windows until the state stops moving.
  double p = 0.0, s = 0.0;
  const double h = 1e-3;
  for (int window = 0; window < 100000; ++window) {
    const double p_old = p, s_old = s;
    for (int i = 0; i < 1000; ++i) {
      auto f = [&](double pp, double ss) { return std::pair{-p_rhs(c, pp), -s_rhs(c, pp, ss)}; };
      const auto [k1p, k1s] = f(p, s);
      const auto [k2p, k2s] = f(p + 0.5 * h * k1p, s + 0.5 * h * k1s);
      const auto [k3p, k3s] = f(p + 0.5 * h * k2p, s + 0.5 * h * k2s);
      const auto [k4p, k4s] = f(p + h * k3p, s + h * k3s);
      p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
      s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
    }
    check_finite(p);
    check_finite(s);
    const double change = std::abs(p - p_old) + std::abs(s - s_old);
    if (change <= 1e-12 * std::max(1.0, std::abs(p) + std::abs(s))) {
      RiccatiSolution sol;
      sol.n = P.n;
      sol.T = P.T;
      sol.r = P.r;
      sol.c_l = P.c_l;
      sol.N = N;
      sol.steps = 0;
      sol.p = {p};
      sol.s = {s};
      sol.dp = {0.0};
      sol.ds = {0.0};
      return sol;
    }
  }
  throw MfgError(ErrorCode::BlowUp, "no stationary Riccati state");
}

double riccati_gap(const RiccatiSolution& a, const RiccatiSolution& b) {
  if (a.steps != b.steps || a.T != b.T) throw MfgError(ErrorCode::SizeMismatch, "Riccati grids differ");
  double gap = 0.0;
  for (std::size_t j = 0; j < a.p.size(); ++j) {
    gap = std::max(gap, std::abs(a.p[j] - b.p[j]) + std::abs(a.s[j] - b.s[j]));
  }
  return gap;
}

Vec riccati_y0_mean(const LQParams& params, const RiccatiSolution& sol) {
  return (sol.p_at(0.0) + sol.s_at(0.0)) * params.mu0;
}

double riccati_mfe_cost(const LQParams& P, const RiccatiSolution& sol) {
  // v = tr Var(X | F0), m = E|mean|^2; both follow linear ODEs driven by the
  // feedback. Integrated with RK4 on the Riccati grid (or 1e4 steps when the
  // solution is stationary).
  const double sig = P.Sigma.squaredNorm(), sig0 = P.Sigma0.squaredNorm();
  const int steps = sol.steps > 0 ? sol.steps : 10000;
  const double h = P.T / steps;
  const double cl = P.c_l, q = P.q, f = P.f_cost, g = P.g_cost, rho = P.rho, r = P.r;
  auto state_rhs = [&](double t, double v, double m) {
    const double p = sol.p_at(t), R = p + sol.s_at(t);
    return std::pair{-2 * p / cl * v + sig, -2 * R / cl * m + sig0};
  };
  auto running = [&](double t, double v, double m) {
    const double p = sol.p_at(t), R = p + sol.s_at(t);
    const double control = (p * p * v + R * R * m) / (cl * cl);
    const double value = 0.5 * cl * control + 0.5 * q * (v + m) + 0.5 * f * (v + (1 - rho) * (1 - rho) * m);
    return std::exp(-r * t) * value;
  };
  double v = P.Lambda0.trace(), m = P.mu0.squaredNorm(), cost = 0.0;
  for (int j = 0; j < steps; ++j) {
    const double t = j * h;
    // Augmented RK4 on (v, m, accumulated cost).
    const auto [a1, b1] = state_rhs(t, v, m);
    const double c1 = running(t, v, m);
    const auto [a2, b2] = state_rhs(t + h / 2, v + h / 2 * a1, m + h / 2 * b1);
    const double c2 = running(t + h / 2, v + h / 2 * a1, m + h / 2 * b1);
    const auto [a3, b3] = state_rhs(t + h / 2, v + h / 2 * a2, m + h / 2 * b2);
    const double c3 = running(t + h / 2, v + h / 2 * a2, m + h / 2 * b2);
    const auto [a4, b4] = state_rhs(t + h, v + h * a3, m + h * b3);
    const double c4 = running(t + h, v + h * a3, m + h * b3);
    v += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
    m += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    cost += h / 6 * (c1 + 2 * c2 + 2 * c3 + c4);
  }
  cost += std::exp(-r * P.T) * 0.5 * g * (v + (1 - rho) * (1 - rho) * m);
  return cost;
}

void oracle_paths_inplace(const RiccatiSolution& sol, const LQParams& params, PathEnsemble& e) {
  const int n = params.n, d = params.d;
  if (e.dims().n != n || e.dims().d != d) throw MfgError(ErrorCode::SizeMismatch, "oracle dimensions");
  if (sol.N > 0 && e.particles() != sol.N) {
    throw MfgError(ErrorCode::SizeMismatch, "N-player oracle needs exactly N particles per path");
  }
  const TimeGrid& grid = e.grid();
  const double dt = grid.dt();
  WideMat vol(n, 2 * d);
  vol << params.Sigma, params.Sigma0;
  const int M = e.particles();
  parallel_for(e.paths(), [&](int p) {
    Vec mean = params.mu0;
    for (int j = 0; j <= grid.steps; ++j) {
      const double t = grid.t(j);
      const double pj = sol.p_at(t), sj = sol.s_at(t);
      if (sol.N > 0) mean = e.slice(j, p).rowwise().mean();
      for (int i = 0; i < M; ++i) {
        const Vec x = Eigen::Map<const Eigen::VectorXd>(e.x_data(j, p, i), n);
        const Vec y = pj * x + sj * mean;
        e.set_y(j, p, i, y);
        const double own = sol.N > 0 ? pj + sj / sol.N : pj;
        e.set_z(j, p, i, own * params.Sigma);
        e.set_z0(j, p, i, (pj + sj) * params.Sigma0);
        if (j == grid.steps) continue;
        const Vec drift = -y / params.c_l;
        WideVec w(2 * d);
        const double* a = e.dw_data(j, p, i);
        const double* b = e.dw0_data(j, p);
        for (int c = 0; c < d; ++c) {
          w[c] = a[c];
          w[d + c] = b[c];
        }
        e.set_x(j + 1, p, i, euler_step(x, drift, vol, w, dt));
      }
      if (sol.N == 0 && j < grid.steps) {
        WideVec w0 = WideVec::Zero(2 * d);
        const double* b = e.dw0_data(j, p);
        for (int c = 0; c < d; ++c) w0[d + c] = b[c];
        mean = euler_step(mean, Vec(-(pj + sj) * mean / params.c_l), vol, w0, dt);
      }
    }
  });
}

PathEnsemble oracle_paths(const RiccatiSolution& sol, const LQParams& params, const NoiseStreams& streams,
                          const TimeGrid& grid, const EnsembleLayout& layout) {
  PathEnsemble e = PathEnsemble::sample(Dimensions{params.n, params.d, params.n}, grid, layout, streams,
                                        gaussian_sampler(params.mu0, params.Lambda0));
  oracle_paths_inplace(sol, params, e);
  return e;
}

}  // namespace mfg
