#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>

namespace mfg {

const char* to_string(Family f) {
  switch (f) {
    case Family::ConstantVol: return "constant_vol";
    case Family::Affine: return "affine";
    case Family::LQ: return "lq";
    case Family::General: return "general";
  }
  return "unknown";
}

void LQParams::validate(bool allow_negative_costs) const {
  Dimensions{n, d, n}.validate();
  if (!allow_negative_costs && (q < 0 || f_cost < 0 || g_cost < 0)) {
    throw MfgError(ErrorCode::InvalidParams, "cost weights must be nonnegative");
  }
  if (!(c_l > 0)) throw MfgError(ErrorCode::InvalidParams, "control weight must be positive");
  if (Sigma.rows() != n || Sigma.cols() != d || Sigma0.rows() != n || Sigma0.cols() != d) {
    throw MfgError(ErrorCode::SizeMismatch, "volatility matrices must be n x d");
  }
  if (mu0.size() != n || Lambda0.rows() != n || Lambda0.cols() != n) {
    throw MfgError(ErrorCode::SizeMismatch, "initial law parameters must match n");
  }
  if ((Lambda0 - Lambda0.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw MfgError(ErrorCode::InvalidParams, "initial covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(Lambda0)};
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw MfgError(ErrorCode::InvalidParams, "initial covariance must be positive semidefinite");
  }
  if (!(T > 0) || r < 0) throw MfgError(ErrorCode::InvalidParams, "need T > 0 and r >= 0");
}

void GameSpec::validate() const {
  dims.validate();
  if (!(T > 0)) throw MfgError(ErrorCode::InvalidParams, "horizon must be positive");
  if (r < 0) throw MfgError(ErrorCode::InvalidParams, "discount must be nonnegative");
  if (!m0 || !b || !sigma || !sigma0 || !L || !G || !DxL || !DaL || !DmL || !DxG || !DmG) {
    throw MfgError(ErrorCode::InvalidParams, "every coefficient and derivative callable is required");
  }
  if (constant_vol() && (!cv || dims.k != dims.n)) {
    throw MfgError(ErrorCode::InvalidParams, "constant-volatility family needs k = n and family data");
  }
  if (family == Family::Affine && !affine) throw MfgError(ErrorCode::InvalidParams, "affine data missing");
}

namespace {

double pairing(const GameSpec& spec, const HamiltonianPoint& p, const Vec& x, const Vec& a) {
  return spec.b(x, a, *p.m).dot(p.y) + frob(spec.sigma(x, a, *p.m), p.z) +
         frob(spec.sigma0(x, a, *p.m), p.z0);
}

Vec pairing_grad_a(const GameSpec& spec, const HamiltonianPoint& p, const Vec& a) {
  const int k = spec.dims.k;
  if (spec.constant_vol()) return p.y;
  Vec g(k);
  if (spec.family == Family::Affine) {
    const auto& A = *spec.affine;
    g = A.B1.transpose() * p.y;
    for (int j = 0; j < k; ++j) g[j] += frob(A.S1[j], p.z) + frob(A.C1[j], p.z0);
    return g;
  }
  for (int j = 0; j < k; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(a[j]));
    Vec up = a, dn = a;
    up[j] += h;
    dn[j] -= h;
    g[j] = (pairing(spec, p, p.x, up) - pairing(spec, p, p.x, dn)) / (2 * h);
  }
  return g;
}

Vec pairing_grad_x(const GameSpec& spec, const HamiltonianPoint& p, const Vec& a) {
  const int n = spec.dims.n;
  Vec g = Vec::Zero(n);
  if (spec.constant_vol()) return g;
  if (spec.family == Family::Affine) {
    const auto& A = *spec.affine;
    g = A.B2.transpose() * p.y;
    for (int j = 0; j < n; ++j) g[j] += frob(A.S2[j], p.z) + frob(A.C2[j], p.z0);
    return g;
  }
  for (int j = 0; j < n; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(p.x[j]));
    Vec up = p.x, dn = p.x;
    up[j] += h;
    dn[j] -= h;
    g[j] = (pairing(spec, p, up, a) - pairing(spec, p, dn, a)) / (2 * h);
  }
  return g;
}

Vec objective_grad(const GameSpec& spec, const HamiltonianPoint& p, const Vec& a) {
  return spec.DaL(p.x, a, *p.m) + pairing_grad_a(spec, p, a);
}

// Golden-section search along coordinate c, after bracketing by doubling.
void golden_coordinate(const std::function<double(const Vec&)>& f, Vec& a, int c) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  auto at = [&](double v) {
    Vec t = a;
    t[c] = v;
    return f(t);
  };
  double lo = a[c] - 1.0, hi = a[c] + 1.0;
  double step = 1.0;
  for (int i = 0; i < 60 && at(lo) < at(a[c]); ++i) lo -= (step *= 2);
  step = 1.0;
  for (int i = 0; i < 60 && at(hi) < at(a[c]); ++i) hi += (step *= 2);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = at(x1), f2 = at(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = at(x2);
    }
  }
  a[c] = 0.5 * (lo + hi);
}

Vec newton_minimize(const GameSpec& spec, const HamiltonianPoint& p) {
  const int k = spec.dims.k;
  auto f = [&](const Vec& a) { return hamiltonian_objective(spec, p, a); };
  auto grad = [&](const Vec& a) { return objective_grad(spec, p, a); };
  Vec a = Vec::Zero(k);
  const double scale = std::max(1.0, grad(a).norm());
  const double tol = 1e-10 * scale;
  for (int it = 0; it < 100; ++it) {
    const Vec g = grad(a);
    if (!g.allFinite()) break;
    if (g.norm() <= tol) return a;
    Mat H(k, k);
    for (int c = 0; c < k; ++c) {
      const double h = 1e-5 * std::max(1.0, std::abs(a[c]));
      Vec up = a, dn = a;
      up[c] += h;
      dn[c] -= h;
      H.col(c) = (grad(up) - grad(dn)) / (2 * h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) break;
    const Vec s = -llt.solve(g);
    const double f0 = f(a);
    const double slope = g.dot(s);
    double t = 1.0;
    while (t > 1e-12 && f(a + t * s) > f0 + 1e-4 * t * slope) t *= 0.5;
    if (t <= 1e-12) break;
    a += t * s;
  }
  for (int sweep = 0; sweep < 200; ++sweep) {
    for (int c = 0; c < k; ++c) golden_coordinate(f, a, c);
    if (grad(a).norm() <= tol) return a;
  }
  const Vec g = grad(a);
  if (!g.allFinite() || g.norm() > 1e-6 * scale) {
    throw MfgError(ErrorCode::NonConvexMinimization, "Hamiltonian minimization did not converge",
                   g.norm());
  }
  return a;
}

void check_point(const GameSpec& spec, const HamiltonianPoint& p) {
  const auto& D = spec.dims;
  if (p.m == nullptr) throw MfgError(ErrorCode::InvalidParams, "Hamiltonian point needs a measure");
  if (p.x.size() != D.n || p.y.size() != D.n || p.z.rows() != D.n || p.z.cols() != D.d ||
      p.z0.rows() != D.n || p.z0.cols() != D.d || p.m->dim() != D.n) {
    throw MfgError(ErrorCode::SizeMismatch, "Hamiltonian point inconsistent with the game dimensions");
  }
}

}  // namespace

double hamiltonian_objective(const GameSpec& spec, const HamiltonianPoint& p, const Vec& a) {
  return pairing(spec, p, p.x, a) + spec.L(p.x, a, *p.m);
}

Vec minimizer_alpha(const GameSpec& spec, const HamiltonianPoint& p) {
  check_point(spec, p);
  if (spec.constant_vol() && spec.cv->alpha0) return spec.cv->alpha0(p.x, p.y);
  return newton_minimize(spec, p);
}

double hamiltonian(const GameSpec& spec, const HamiltonianPoint& p) {
  return hamiltonian_objective(spec, p, minimizer_alpha(spec, p));
}

double reduced_hamiltonian(const GameSpec& spec, const Vec& x, const Vec& y) {
  if (!spec.constant_vol()) throw MfgError(ErrorCode::WrongFamily, "reduced Hamiltonian needs constant volatility");
  const auto& cv = *spec.cv;
  Vec a;
  if (cv.alpha0) {
    a = cv.alpha0(x, y);
  } else {
    const EmpiricalMeasure m(x);
    HamiltonianPoint p{x, y, Mat::Zero(spec.dims.n, spec.dims.d), Mat::Zero(spec.dims.n, spec.dims.d), &m};
    GameSpec reduced = spec;
    // Newton on L0 + a.y alone: drop F and the volatility pairings.
    reduced.L = [&cv](const Vec& xx, const Vec& aa, const EmpiricalMeasure&) { return cv.L0(xx, aa); };
    reduced.sigma = [n = spec.dims.n, d = spec.dims.d](const Vec&, const Vec&, const EmpiricalMeasure&) {
      return Mat(Mat::Zero(n, d));
    };
    reduced.sigma0 = reduced.sigma;
    a = newton_minimize(reduced, p);
  }
  return cv.L0(x, a) + a.dot(y);
}

HamiltonianDerivatives hamiltonian_derivatives(const GameSpec& spec, const HamiltonianPoint& p) {
  HamiltonianDerivatives out;
  out.alpha = minimizer_alpha(spec, p);
  const Vec& a = out.alpha;
  if (spec.constant_vol()) {
    const auto& cv = *spec.cv;
    out.Dy = a;
    out.Dz = cv.Sigma;
    out.Dz0 = cv.Sigma0;
    out.Dx = cv.DxL0(p.x, a) + cv.DxF(p.x, *p.m);
    return out;
  }
  out.Dy = spec.b(p.x, a, *p.m);
  out.Dz = spec.sigma(p.x, a, *p.m);
  out.Dz0 = spec.sigma0(p.x, a, *p.m);
  out.Dx = spec.DxL(p.x, a, *p.m) + pairing_grad_x(spec, p, a);
  return out;
}

Vec hamiltonian_Dm(const GameSpec& spec, const HamiltonianPoint& p, const Vec& xi) {
  const Vec a = minimizer_alpha(spec, p);
  return spec.DmL(p.x, a, *p.m, xi);
}

bool GradientCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

double GradientCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

namespace {

double rel_err(const Vec& analytic, const Vec& fd) {
  double worst = 0.0;
  for (int i = 0; i < fd.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
  }
  return worst;
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& v) {
  Vec g(v.size());
  for (int c = 0; c < v.size(); ++c) {
    const double h = 1e-5 * std::max(1.0, std::abs(v[c]));
    Vec up = v, dn = v;
    up[c] += h;
    dn[c] -= h;
    g[c] = (f(up) - f(dn)) / (2 * h);
  }
  return g;
}

// N times the gradient of f(m) in the position of atom j.
Vec fd_atom(const std::function<double(const EmpiricalMeasure&)>& f, const EmpiricalMeasure& m, int j) {
  const Vec at = m.atom(j);
  Vec g(at.size());
  for (int c = 0; c < at.size(); ++c) {
    const double h = 1e-5 * std::max(1.0, std::abs(at[c]));
    Vec up = at, dn = at;
    up[c] += h;
    dn[c] -= h;
    g[c] = m.size() * (f(m.with_atom(j, up)) - f(m.with_atom(j, dn))) / (2 * h);
  }
  return g;
}

Vec draw(NormalStream& s, int dim, double scale) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = scale * s.next();
  return v;
}

}  // namespace

GradientCheckReport gradient_check(const GameSpec& spec, int probes, std::uint64_t rng_seed,
                                   double tolerance) {
  if (probes < 1) throw MfgError(ErrorCode::InvalidParams, "gradient check needs at least one probe");
  const int n = spec.dims.n, k = spec.dims.k;
  const NoiseStreams streams(rng_seed);
  GradientCheckReport report;
  report.tolerance = tolerance;
  auto record = [&](const std::string& name, double err) {
    for (auto& e : report.entries) {
      if (e.name == name) {
        e.max_rel_error = std::max(e.max_rel_error, err);
        e.pass = e.max_rel_error <= tolerance;
        return;
      }
    }
    report.entries.push_back({name, err, err <= tolerance});
  };
  constexpr int kAtoms = 5;
  const double scales[] = {0.5, 1.0, 2.0};
  for (int probe = 0; probe < probes; ++probe) {
    auto s = streams.auxiliary(static_cast<std::uint32_t>(probe), 0x6C);
    const double scale = scales[probe % 3];
    const Vec x = draw(s, n, scale);
    const Vec a = draw(s, k, scale);
    Eigen::MatrixXd atoms(n, kAtoms);
    for (int j = 0; j < kAtoms; ++j) atoms.col(j) = draw(s, n, scale);
    const EmpiricalMeasure m(atoms);
    const int j = probe % kAtoms;
    const Vec xi = m.atom(j);

    record("DxL", rel_err(spec.DxL(x, a, m), fd_gradient([&](const Vec& v) { return spec.L(v, a, m); }, x)));
    record("DaL", rel_err(spec.DaL(x, a, m), fd_gradient([&](const Vec& v) { return spec.L(x, v, m); }, a)));
    record("DmL", rel_err(spec.DmL(x, a, m, xi),
                          fd_atom([&](const EmpiricalMeasure& mm) { return spec.L(x, a, mm); }, m, j)));
    record("DxG", rel_err(spec.DxG(x, m), fd_gradient([&](const Vec& v) { return spec.G(v, m); }, x)));
    record("DmG", rel_err(spec.DmG(x, m, xi),
                          fd_atom([&](const EmpiricalMeasure& mm) { return spec.G(x, mm); }, m, j)));
    if (spec.constant_vol()) {
      const auto& cv = *spec.cv;
      record("DxL0", rel_err(cv.DxL0(x, a), fd_gradient([&](const Vec& v) { return cv.L0(v, a); }, x)));
      record("DaL0", rel_err(cv.DaL0(x, a), fd_gradient([&](const Vec& v) { return cv.L0(x, v); }, a)));
      record("DxF", rel_err(cv.DxF(x, m), fd_gradient([&](const Vec& v) { return cv.F(v, m); }, x)));
      record("DmF", rel_err(cv.DmF(x, m, xi),
                            fd_atom([&](const EmpiricalMeasure& mm) { return cv.F(x, mm); }, m, j)));
    }
  }
  return report;
}

InitialSampler gaussian_sampler(const Vec& mean, const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(cov)};
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Mat factor = root;
  return [mean, factor](NormalStream& s) {
    Vec g(mean.size());
    for (int i = 0; i < mean.size(); ++i) g[i] = s.next();
    return Vec(mean + factor * g);
  };
}

double quadratic_displacement_constant(double weight, double rho) {
  const double lo = std::min(1.0, 1.0 - rho), hi = std::max(1.0, 1.0 - rho);
  return weight >= 0 ? weight * lo : weight * hi;
}

GameSpec make_constant_vol(Dimensions dims, double T, ConstantVolData data, RealFn_xm G, VecFn_xm DxG,
                           VecFn_xmy DmG, InitialSampler m0) {
  GameSpec spec;
  spec.dims = dims;
  spec.T = T;
  spec.family = Family::ConstantVol;
  spec.m0 = std::move(m0);
  const Mat Sigma = data.Sigma, Sigma0 = data.Sigma0;
  spec.b = [](const Vec&, const Vec& a, const EmpiricalMeasure&) { return a; };
  spec.sigma = [Sigma](const Vec&, const Vec&, const EmpiricalMeasure&) { return Sigma; };
  spec.sigma0 = [Sigma0](const Vec&, const Vec&, const EmpiricalMeasure&) { return Sigma0; };
  auto L0 = data.L0;
  auto F = data.F;
  auto DxL0 = data.DxL0, DaL0 = data.DaL0;
  auto DxF = data.DxF;
  auto DmF = data.DmF;
  spec.L = [L0, F](const Vec& x, const Vec& a, const EmpiricalMeasure& m) { return L0(x, a) + F(x, m); };
  spec.DxL = [DxL0, DxF](const Vec& x, const Vec& a, const EmpiricalMeasure& m) {
    return Vec(DxL0(x, a) + DxF(x, m));
  };
  spec.DaL = [DaL0](const Vec& x, const Vec& a, const EmpiricalMeasure&) { return DaL0(x, a); };
  spec.DmL = [DmF](const Vec& x, const Vec&, const EmpiricalMeasure& m, const Vec& y) { return DmF(x, m, y); };
  spec.G = std::move(G);
  spec.DxG = std::move(DxG);
  spec.DmG = std::move(DmG);
  spec.cv = std::move(data);
  spec.validate();
  return spec;
}

GameSpec make_affine(Dimensions dims, double T, AffineData data, RealFn_xam L, VecFn_xam DxL,
                     VecFn_xam DaL, VecFn_xamy DmL, RealFn_xm G, VecFn_xm DxG, VecFn_xmy DmG,
                     InitialSampler m0) {
  const int n = dims.n, d = dims.d, k = dims.k;
  if (data.B0.size() != n || data.B1.rows() != n || data.B1.cols() != k || data.B2.rows() != n ||
      data.B2.cols() != n || data.S0.rows() != n || data.S0.cols() != d || data.C0.rows() != n ||
      data.C0.cols() != d || static_cast<int>(data.S1.size()) != k || static_cast<int>(data.C1.size()) != k ||
      static_cast<int>(data.S2.size()) != n || static_cast<int>(data.C2.size()) != n) {
    throw MfgError(ErrorCode::SizeMismatch, "affine coefficient shapes");
  }
  GameSpec spec;
  spec.dims = dims;
  spec.T = T;
  spec.family = Family::Affine;
  spec.m0 = std::move(m0);
  spec.b = [data](const Vec& x, const Vec& a, const EmpiricalMeasure&) {
    return Vec(data.B0 + data.B1 * a + data.B2 * x);
  };
  auto affine_vol = [](const Mat& base, const std::vector<Mat>& ca, const std::vector<Mat>& cx) {
    return [base, ca, cx](const Vec& x, const Vec& a, const EmpiricalMeasure&) {
      Mat s = base;
      for (std::size_t j = 0; j < ca.size(); ++j) s += a[static_cast<int>(j)] * ca[j];
      for (std::size_t j = 0; j < cx.size(); ++j) s += x[static_cast<int>(j)] * cx[j];
      return s;
    };
  };
  spec.sigma = affine_vol(data.S0, data.S1, data.S2);
  spec.sigma0 = affine_vol(data.C0, data.C1, data.C2);
  spec.L = std::move(L);
  spec.DxL = std::move(DxL);
  spec.DaL = std::move(DaL);
  spec.DmL = std::move(DmL);
  spec.G = std::move(G);
  spec.DxG = std::move(DxG);
  spec.DmG = std::move(DmG);
  spec.affine = std::move(data);
  spec.validate();
  return spec;
}

namespace {

GameSpec quadratic(const LQParams& P, Family family) {
  const double q = P.q, f = P.f_cost, g = P.g_cost, rho = P.rho, cl = P.c_l;
  ConstantVolData cv;
  cv.Sigma = P.Sigma;
  cv.Sigma0 = P.Sigma0;
  cv.L0 = [q, cl](const Vec& x, const Vec& a) { return 0.5 * cl * a.squaredNorm() + 0.5 * q * x.squaredNorm(); };
  cv.DxL0 = [q](const Vec& x, const Vec&) { return Vec(q * x); };
  cv.DaL0 = [cl](const Vec&, const Vec& a) { return Vec(cl * a); };
  cv.alpha0 = [cl](const Vec&, const Vec& y) { return Vec(-y / cl); };
  cv.F = [f, rho](const Vec& x, const EmpiricalMeasure& m) { return 0.5 * f * (x - rho * m.mean()).squaredNorm(); };
  cv.DxF = [f, rho](const Vec& x, const EmpiricalMeasure& m) { return Vec(f * (x - rho * m.mean())); };
  cv.DmF = [f, rho](const Vec& x, const EmpiricalMeasure& m, const Vec&) {
    return Vec(-f * rho * (x - rho * m.mean()));
  };
  cv.C_L = cl;
  cv.C_F = quadratic_displacement_constant(f, rho);
  auto G = [g, rho](const Vec& x, const EmpiricalMeasure& m) { return 0.5 * g * (x - rho * m.mean()).squaredNorm(); };
  auto DxG = [g, rho](const Vec& x, const EmpiricalMeasure& m) { return Vec(g * (x - rho * m.mean())); };
  auto DmG = [g, rho](const Vec& x, const EmpiricalMeasure& m, const Vec&) {
    return Vec(-g * rho * (x - rho * m.mean()));
  };
  GameSpec spec = make_constant_vol(Dimensions{P.n, P.d, P.n}, P.T, std::move(cv), G, DxG, DmG,
                                    gaussian_sampler(P.mu0, P.Lambda0));
  spec.family = family;
  spec.r = P.r;
  spec.infinite_horizon = P.r > 0;
  spec.lq = P;
  spec.C_G = quadratic_displacement_constant(g, rho);
  return spec;
}

}  // namespace

GameSpec make_lq(const LQParams& params) {
  params.validate(false);
  if (params.c_l != 1.0) throw MfgError(ErrorCode::InvalidParams, "the LQ family fixes the control weight to 1");
  return quadratic(params, Family::LQ);
}

GameSpec make_constant_vol_quadratic(const LQParams& params) {
  params.validate(true);
  return quadratic(params, Family::ConstantVol);
}

}  // namespace mfg
