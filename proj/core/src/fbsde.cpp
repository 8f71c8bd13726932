#include "mfg/fbsde.hpp"

#include "detail.hpp"

#include "mfg/parallel.hpp"
#include "mfg/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mfg {

void SolverConfig::validate() const {
  if (!(picard_damping > 0 && picard_damping <= 1)) {
    throw MfgError(ErrorCode::InvalidParams, "damping must lie in (0, 1]");
  }
  if (!(picard_tol > 0) || picard_max_iters < 1) throw MfgError(ErrorCode::InvalidParams, "tolerances must be positive");
  if (!(eta > 0 && eta <= 1) || !(eta_floor > 0)) throw MfgError(ErrorCode::InvalidParams, "step eta must lie in (0, 1]");
  if (!(blowup_bound > 0)) throw MfgError(ErrorCode::InvalidParams, "blow-up bound must be positive");
}

int basis_size(int n) { return 1 + n + n * (n + 1) / 2 + n + 1; }

void basis_row(const double* x, const Vec& mean, int n, double* out) {
  int c = 0;
  out[c++] = 1.0;
  for (int a = 0; a < n; ++a) out[c++] = x[a];
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) out[c++] = x[a] * x[b];
  for (int a = 0; a < n; ++a) out[c++] = mean[a];
  out[c] = mean.squaredNorm();
}

void DecouplingMaps::evaluate(int node, const double* x, const Vec& mean, Vec& y, Mat& z, Mat& z0) const {
  const Eigen::MatrixXd& C = coef[node];
  double row[64];
  const int p = static_cast<int>(C.rows());
  if (lo.empty()) {
    basis_row(x, mean, n, row);
  } else {
    // Mean features are clamped to the fitted range: across paths they are
    // nearly collinear with the constant, so extrapolating them is unstable.
    Vec mc = mean.cwiseMax(lo[node]).cwiseMin(hi[node]);
    basis_row(x, mc, n, row);
  }
  y.setZero(n);
  z.setZero(n, d);
  z0.setZero(n, d);
  for (int k = 0; k < p; ++k) {
    const double bk = row[k];
    for (int a = 0; a < n; ++a) y[a] += bk * C(k, a);
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < d; ++c) {
        z(a, c) += bk * C(k, n + a * d + c);
        z0(a, c) += bk * C(k, n + n * d + a * d + c);
      }
  }
}

void DecouplingMaps::blend(const DecouplingMaps& proposal, double theta) {
  if (empty() || theta == 1.0) {
    *this = proposal;
    return;
  }
  for (std::size_t j = 0; j < coef.size(); ++j) coef[j] = theta * proposal.coef[j] + (1 - theta) * coef[j];
  lo = proposal.lo;
  hi = proposal.hi;
}

namespace {

using detail::NodeMeasure;

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Slot {
  int n, d;
  const PathEnsemble& e;
  std::size_t at(int j, int p, int i) const { return e.entry(j, p, i); }
};

Vec load_vec(const std::vector<double>& v, std::size_t entry, int n) {
  return Eigen::Map<const Eigen::VectorXd>(&v[entry * n], n);
}

Mat load_mat(const std::vector<double>& v, std::size_t entry, int n, int d) {
  return Eigen::Map<const RowMajorMat>(&v[entry * n * d], n, d);
}

void store_vec(std::vector<double>& v, std::size_t entry, const Vec& x) {
  std::copy(x.data(), x.data() + x.size(), &v[entry * x.size()]);
}

void store_mat(std::vector<double>& v, std::size_t entry, const Mat& m) {
  const int n = static_cast<int>(m.rows()), d = static_cast<int>(m.cols());
  double* out = &v[entry * n * d];
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < d; ++c) out[a * d + c] = m(a, c);
}

WideVec load_increment(const PathEnsemble& e, int j, int p, int i) {
  const int d = e.dims().d;
  WideVec w(2 * d);
  const double* a = e.dw_data(j, p, i);
  const double* b = e.dw0_data(j, p);
  for (int c = 0; c < d; ++c) {
    w[c] = a[c];
    w[d + c] = b[c];
  }
  return w;
}

void check_flow(const PathEnsemble& e, const MeasureFlow* flow) {
  if (flow == nullptr) return;
  if (flow->paths() != e.paths() || flow->grid().steps != e.grid().steps) {
    throw MfgError(ErrorCode::SizeMismatch, "flow layout does not match the ensemble");
  }
}

void guard(const Vec& v, double bound, const char* what) {
  if (!v.allFinite() || v.cwiseAbs().maxCoeff() > bound) {
    throw MfgError(ErrorCode::NonFiniteState, std::string(what) + " left the admissible range");
  }
}

Vec full_driver(const FbsdeCoefficients& c, double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                const EmpiricalMeasure& m) {
  Vec f = c.driver(t, x, y, z, z0, m);
  if (c.r != 0.0) f -= c.r * y;
  return f;
}

constexpr double kBound = 1e8;

}  // namespace

void forward_pass(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow) {
  check_flow(e, flow);
  const int n = e.dims().n, d = e.dims().d, M = e.particles();
  const TimeGrid& grid = e.grid();
  const double dt = grid.dt();
  parallel_for(e.paths(), [&](int p) {
    for (int j = 0; j < grid.steps; ++j) {
      const NodeMeasure m(e, flow, j, p);
      const double t = grid.t(j);
      for (int i = 0; i < M; ++i) {
        const std::size_t at = e.entry(j, p, i);
        const Vec x = load_vec(e.X, at, n);
        const Vec y = load_vec(e.Y, at, n);
        const Mat z = load_mat(e.Z, at, n, d), z0 = load_mat(e.Z0, at, n, d);
        const Vec next = euler_step(x, coeffs.drift(t, x, y, z, z0, *m), coeffs.vol(t, x, y, z, z0, *m),
                                    load_increment(e, j, p, i), dt);
        guard(next, kBound, "forward state");
        store_vec(e.X, e.entry(j + 1, p, i), next);
      }
    }
  });
}

void forward_pass_feedback(const FbsdeCoefficients& coeffs, PathEnsemble& e, const DecouplingMaps& maps,
                           const MeasureFlow* flow, const FbsdeSources* src) {
  check_flow(e, flow);
  const int n = e.dims().n, d = e.dims().d, M = e.particles();
  const TimeGrid& grid = e.grid();
  const double dt = grid.dt();
  if (static_cast<int>(maps.coef.size()) != grid.steps || maps.n != n || maps.d != d) {
    throw MfgError(ErrorCode::SizeMismatch, "decoupling maps do not match the ensemble");
  }
  parallel_for(e.paths(), [&](int p) {
    Vec y;
    Mat z, z0;
    for (int j = 0; j < grid.steps; ++j) {
      const NodeMeasure m(e, flow, j, p);
      const Vec& mean = (*m).mean();
      const double t = grid.t(j);
      for (int i = 0; i < M; ++i) {
        const std::size_t at = e.entry(j, p, i);
        const Vec x = load_vec(e.X, at, n);
        maps.evaluate(j, &e.X[at * n], mean, y, z, z0);
        store_vec(e.Y, at, y);
        store_mat(e.Z, at, z);
        store_mat(e.Z0, at, z0);
        Vec drift = coeffs.drift(t, x, y, z, z0, *m);
        WideMat vol = coeffs.vol(t, x, y, z, z0, *m);
        if (src != nullptr) {
          drift += load_vec(src->b0, at, n);
          vol += load_mat(src->s0, at, n, 2 * d);
        }
        const Vec next = euler_step(x, drift, vol, load_increment(e, j, p, i), dt);
        guard(next, kBound, "forward state");
        store_vec(e.X, e.entry(j + 1, p, i), next);
      }
    }
    const int J = grid.steps;
    const NodeMeasure m(e, flow, J, p);
    for (int i = 0; i < M; ++i) {
      const std::size_t at = e.entry(J, p, i);
      Vec yT = coeffs.terminal(load_vec(e.X, at, n), *m);
      if (src != nullptr) yT += load_vec(src->g0, e.entry(0, p, i), n);
      store_vec(e.Y, at, yT);
      const std::size_t prev = e.entry(J - 1, p, i);
      std::copy_n(&e.Z[prev * n * d], n * d, &e.Z[at * n * d]);
      std::copy_n(&e.Z0[prev * n * d], n * d, &e.Z0[at * n * d]);
    }
  });
}

void backward_pass(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                   DecouplingMaps* maps_out, const FbsdeSources* src) {
  check_flow(e, flow);
  const int n = e.dims().n, d = e.dims().d, M = e.particles(), P = e.paths();
  const TimeGrid& grid = e.grid();
  const int J = grid.steps;
  const double dt = grid.dt();
  const int nb = basis_size(n);
  const int nz = n * d;
  const Eigen::Index rows = static_cast<Eigen::Index>(P) * M;
  if (rows < nb) {
    throw MfgError(ErrorCode::SingularRegression,
                   "regression needs at least " + std::to_string(nb) + " samples per node");
  }
  if (maps_out != nullptr) {
    maps_out->n = n;
    maps_out->d = d;
    maps_out->coef.assign(J, Eigen::MatrixXd::Zero(nb, n + 2 * nz));
    maps_out->lo.assign(J, Eigen::VectorXd());
    maps_out->hi.assign(J, Eigen::VectorXd());
  }
  const int mean_col = 1 + n + n * (n + 1) / 2;

  parallel_for(P, [&](int p) {
    const NodeMeasure m(e, flow, J, p);
    for (int i = 0; i < M; ++i) {
      const std::size_t at = e.entry(J, p, i);
      Vec yT = coeffs.terminal(load_vec(e.X, at, n), *m);
      if (src != nullptr) yT += load_vec(src->g0, e.entry(0, p, i), n);
      guard(yT, kBound, "terminal adjoint");
      store_vec(e.Y, at, yT);
    }
  });

  Eigen::MatrixXd A(rows, nb), next_y(rows, n), D(rows, d * nb), z0_targets(rows, nz), y_targets(rows, n);
  for (int j = J - 1; j >= 0; --j) {
    std::vector<Vec> means(P);
    parallel_for(P, [&](int p) {
      const NodeMeasure m(e, flow, j, p);
      means[p] = (*m).mean();
      double row[64];
      for (int i = 0; i < M; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(p) * M + i;
        basis_row(e.x_data(j, p, i), means[p], n, row);
        for (int c = 0; c < nb; ++c) A(r, c) = row[c];
        const std::size_t nx = e.entry(j + 1, p, i);
        for (int a = 0; a < n; ++a) next_y(r, a) = e.Y[nx * n + a];
      }
    });
    // Columns are scaled to unit max-norm so the rank threshold is relative
    // to comparable magnitudes.
    Eigen::VectorXd scale = A.cwiseAbs().colwise().maxCoeff().transpose();
    for (int c = 0; c < nb; ++c)
      if (scale[c] == 0.0) scale[c] = 1.0;
    const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);
    cod.compute(As);

    // Z: least squares of the residual Y_{j+1} - E[Y_{j+1} | X_j] on the
    // products basis x normalized idiosyncratic increment. Exact when Y_{j+1}
    // is linear in the increments.
    const Eigen::MatrixXd resid = next_y - As * cod.solve(next_y);
    const double sqdt = std::sqrt(dt);
    parallel_for(P, [&](int p) {
      for (int i = 0; i < M; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(p) * M + i;
        const double* w = e.dw_data(j, p, i);
        for (int c = 0; c < d; ++c)
          for (int k = 0; k < nb; ++k) D(r, c * nb + k) = As(r, k) * (w[c] / sqdt);
      }
    });
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> zcod;
    zcod.setThreshold(1e-10);
    zcod.compute(D);
    const Eigen::MatrixXd gamma = zcod.solve(resid);  // (d nb) x n
    Eigen::MatrixXd beta_z_s(nb, 2 * nz);
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < d; ++c) beta_z_s.col(a * d + c) = gamma.col(a).segment(c * nb, nb) / sqdt;

    // Z0: the common increment is shared within a path, so the product
    // regression is not identified; correlate what is left with dW0 instead.
    Eigen::MatrixXd resid0 = resid - D * gamma;
    resid0 -= As * cod.solve(resid0);
    parallel_for(P, [&](int p) {
      const double* w0 = e.dw0_data(j, p);
      for (int i = 0; i < M; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(p) * M + i;
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < d; ++c) z0_targets(r, a * d + c) = resid0(r, a) * w0[c] / dt;
      }
    });
    beta_z_s.rightCols(nz) = cod.solve(z0_targets);
    const Eigen::MatrixXd z_fit = As * beta_z_s;

    parallel_for(P, [&](int p) {
      const NodeMeasure m(e, flow, j, p);
      const double t = grid.t(j);
      for (int i = 0; i < M; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(p) * M + i;
        const std::size_t at = e.entry(j, p, i);
        Mat z(n, d), z0(n, d);
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < d; ++c) {
            z(a, c) = z_fit(r, a * d + c);
            z0(a, c) = z_fit(r, nz + a * d + c);
          }
        store_mat(e.Z, at, z);
        store_mat(e.Z0, at, z0);
        const Vec x = load_vec(e.X, at, n);
        const Vec y_next = next_y.row(r).transpose();
        Vec f = full_driver(coeffs, t, x, y_next, z, z0, *m);
        if (src != nullptr) f += load_vec(src->f0, at, n);
        for (int a = 0; a < n; ++a) y_targets(r, a) = y_next[a] + f[a] * dt;
      }
    });
    const Eigen::MatrixXd beta_y_s = cod.solve(y_targets);
    const Eigen::MatrixXd y_fit = As * beta_y_s;
    parallel_for(P, [&](int p) {
      for (int i = 0; i < M; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(p) * M + i;
        const Vec y = y_fit.row(r).transpose();
        guard(y, kBound, "adjoint");
        store_vec(e.Y, e.entry(j, p, i), y);
      }
    });
    if (maps_out != nullptr) {
      maps_out->coef[j].leftCols(n) = scale.cwiseInverse().asDiagonal() * beta_y_s;
      maps_out->coef[j].rightCols(2 * nz) = scale.cwiseInverse().asDiagonal() * beta_z_s;
      Eigen::VectorXd lo(n), hi(n);
      for (int c = 0; c < n; ++c) {
        lo[c] = A.col(mean_col + c).minCoeff();
        hi[c] = A.col(mean_col + c).maxCoeff();
      }
      maps_out->lo[j] = lo;
      maps_out->hi[j] = hi;
    }
  }
  parallel_for(P, [&](int p) {
    for (int i = 0; i < M; ++i) {
      const std::size_t at = e.entry(J, p, i), prev = e.entry(J - 1, p, i);
      std::copy_n(&e.Z[prev * nz], nz, &e.Z[at * nz]);
      std::copy_n(&e.Z0[prev * nz], nz, &e.Z0[at * nz]);
    }
  });
}

double sup_change(const PathEnsemble& a, const PathEnsemble& b) {
  if (a.X.size() != b.X.size()) throw MfgError(ErrorCode::SizeMismatch, "ensembles differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < a.X.size(); ++i) {
    s = std::max(s, std::abs(a.X[i] - b.X[i]));
    s = std::max(s, std::abs(a.Y[i] - b.Y[i]));
  }
  if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
  return s;
}

SolveLog picard_solve(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                      const SolverConfig& config, DecouplingMaps* maps_out) {
  config.validate();
  SolveLog log;
  const double theta = config.picard_damping;
  DecouplingMaps maps;
  for (int it = 1; it <= config.picard_max_iters; ++it) {
    const PathEnsemble old = e;
    forward_pass(coeffs, e, flow);
    PathEnsemble proposal = e;
    backward_pass(coeffs, proposal, flow, &maps);
    if (theta == 1.0) {
      e.Y = proposal.Y;
      e.Z = proposal.Z;
      e.Z0 = proposal.Z0;
    } else {
      auto mix = [theta](std::vector<double>& cur, const std::vector<double>& prop) {
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = theta * prop[i] + (1 - theta) * cur[i];
      };
      mix(e.Y, proposal.Y);
      mix(e.Z, proposal.Z);
      mix(e.Z0, proposal.Z0);
    }
    const double res = sup_change(e, old);
    log.residuals.push_back(res);
    log.sweeps = it;
    if (!std::isfinite(res) || res > config.blowup_bound) {
      throw MfgError(ErrorCode::NonFiniteState, "Picard iterate blew up", res);
    }
    if (res <= config.picard_tol) {
      log.converged = true;
      if (maps_out != nullptr) *maps_out = maps;
      return log;
    }
  }
  throw MfgError(ErrorCode::NoConvergence, "Picard iteration did not converge",
                 log.residuals.empty() ? 0.0 : log.residuals.back());
}

FbsdeCoefficients homotopy_coefficients(const FbsdeCoefficients& base, double delta) {
  if (delta == 1.0) return base;
  FbsdeCoefficients c;
  c.dims = base.dims;
  c.r = 0.0;
  const double om = 1.0 - delta;
  const int d = base.dims.d;
  c.drift = [base, delta, om](double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                              const EmpiricalMeasure& m) {
    if (delta == 0.0) return Vec(-y);
    return Vec(delta * base.drift(t, x, y, z, z0, m) - om * y);
  };
  c.vol = [base, delta, om, d](double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                               const EmpiricalMeasure& m) {
    WideMat zz(z.rows(), 2 * d);
    zz << z, z0;
    if (delta == 0.0) return WideMat(-zz);
    return WideMat(delta * base.vol(t, x, y, z, z0, m) - om * zz);
  };
  c.driver = [base, delta, om](double t, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                               const EmpiricalMeasure& m) {
    if (delta == 0.0) return Vec(x);
    return Vec(delta * full_driver(base, t, x, y, z, z0, m) + om * x);
  };
  c.terminal = [base, delta, om](const Vec& x, const EmpiricalMeasure& m) {
    if (delta == 0.0) return Vec(x);
    return Vec(delta * base.terminal(x, m) + om * x);
  };
  return c;
}

namespace {

using detail::NodeMeasure;

// Sources eps * (phi_1 - phi_0) evaluated on the current iterate.
FbsdeSources make_sources(const FbsdeCoefficients& base, const PathEnsemble& e, const MeasureFlow* flow,
                          double eps) {
  const int n = e.dims().n, d = e.dims().d, M = e.particles();
  const TimeGrid& grid = e.grid();
  const int J = grid.steps;
  FbsdeSources s;
  const std::size_t entries = static_cast<std::size_t>(J) * e.paths() * M;
  s.b0.assign(entries * n, 0.0);
  s.s0.assign(entries * n * 2 * d, 0.0);
  s.f0.assign(entries * n, 0.0);
  s.g0.assign(static_cast<std::size_t>(e.paths()) * M * n, 0.0);
  parallel_for(e.paths(), [&](int p) {
    for (int j = 0; j <= J; ++j) {
      const NodeMeasure m(e, flow, j, p);
      const double t = grid.t(j);
      for (int i = 0; i < M; ++i) {
        const std::size_t at = e.entry(j, p, i);
        const Vec x = load_vec(e.X, at, n);
        if (j == J) {
          store_vec(s.g0, e.entry(0, p, i), Vec(eps * (base.terminal(x, *m) - x)));
          continue;
        }
        const Vec y = load_vec(e.Y, at, n);
        const Mat z = load_mat(e.Z, at, n, d), z0 = load_mat(e.Z0, at, n, d);
        WideMat zz(n, 2 * d);
        zz << z, z0;
        store_vec(s.b0, at, Vec(eps * (base.drift(t, x, y, z, z0, *m) + y)));
        const WideMat sv = eps * (base.vol(t, x, y, z, z0, *m) + zz);
        double* out = &s.s0[at * n * 2 * d];
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < 2 * d; ++c) out[a * 2 * d + c] = sv(a, c);
        store_vec(s.f0, at, Vec(eps * (full_driver(base, t, x, y, z, z0, *m) - x)));
      }
    }
  });
  return s;
}

struct StepOutcome {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

// Damped feedback sweeps on the system at delta0 with sources from the
// previous iterate scaled by eps.
StepOutcome sweep_until_converged(const FbsdeCoefficients& base, double delta0, double eps, PathEnsemble& e,
                                  const MeasureFlow* flow, const SolverConfig& config, DecouplingMaps& maps,
                                  SolveLog& log) {
  const FbsdeCoefficients c = homotopy_coefficients(base, delta0);
  StepOutcome out;
  double first = -1.0;
  for (int it = 1; it <= config.picard_max_iters; ++it) {
    const PathEnsemble old = e;
    std::optional<FbsdeSources> src;
    if (eps > 0.0) src = make_sources(base, e, flow, eps);
    const FbsdeSources* sp = src ? &*src : nullptr;
    PathEnsemble work = e;
    DecouplingMaps proposal;
    backward_pass(c, work, flow, &proposal, sp);
    maps.blend(proposal, config.picard_damping);
    forward_pass_feedback(c, e, maps, flow, sp);
    const double res = sup_change(e, old);
    log.residuals.push_back(res);
    ++log.sweeps;
    out.iterations = it;
    out.residual = res;
    if (!std::isfinite(res)) return out;
    if (first < 0) first = res;
    if (res <= config.picard_tol) {
      out.converged = true;
      return out;
    }
    if (res > 1e3 * std::max(first, config.picard_tol) || res > config.blowup_bound) return out;
  }
  return out;
}

DecouplingMaps zero_maps(const PathEnsemble& e) {
  DecouplingMaps maps;
  maps.n = e.dims().n;
  maps.d = e.dims().d;
  maps.coef.assign(e.grid().steps, Eigen::MatrixXd::Zero(basis_size(maps.n), maps.n + 2 * maps.n * maps.d));
  return maps;
}

}  // namespace

SolveLog continuation_solve(const FbsdeCoefficients& coeffs, PathEnsemble& e, const MeasureFlow* flow,
                            const SolverConfig& config, DecouplingMaps& maps) {
  config.validate();
  SolveLog log;
  auto attempt = [&](double delta0, double eps) -> StepOutcome {
    try {
      return sweep_until_converged(coeffs, delta0, eps, e, flow, config, maps, log);
    } catch (const MfgError& err) {
      if (err.code() != ErrorCode::NonFiniteState) throw;
      return StepOutcome{false, 0, std::numeric_limits<double>::infinity()};
    }
  };

  if (config.direct_first) {
    if (maps.empty()) maps = zero_maps(e);
    const PathEnsemble saved = e;
    const StepOutcome warm = attempt(1.0, 0.0);
    log.steps.push_back({1.0, 0.0, warm.iterations, warm.residual, warm.converged});
    if (warm.converged) {
      forward_pass_feedback(coeffs, e, maps, flow);
      log.converged = true;
      return log;
    }
    e = saved;
    maps = DecouplingMaps{};
  }

  // Linear base system; a zero map is the natural starting point.
  maps = zero_maps(e);
  StepOutcome base = attempt(0.0, 0.0);
  log.steps.push_back({0.0, 0.0, base.iterations, base.residual, base.converged});
  if (!base.converged) {
    throw MfgError(ErrorCode::HomotopyStall, "the linear base system did not converge", base.residual);
  }

  double delta = 0.0;
  double eta = config.eta;
  while (delta < 1.0) {
    double next = delta + eta;
    if (next > 1.0 - 1e-12) next = 1.0;
    const PathEnsemble saved = e;
    const DecouplingMaps saved_maps = maps;
    const StepOutcome step = attempt(delta, next - delta);
    log.steps.push_back({next, eta, step.iterations, step.residual, step.converged});
    if (step.converged) {
      // The converged iterate solves the system at `next`; continue from it.
      delta = next;
      continue;
    }
    e = saved;
    maps = saved_maps;
    eta *= 0.5;
    if (eta < config.eta_floor) {
      throw MfgError(ErrorCode::HomotopyStall, "continuation step failed to contract at the minimum step",
                     step.residual);
    }
  }
  forward_pass_feedback(coeffs, e, maps, flow);
  log.converged = true;
  return log;
}

ResidualReport residual_diagnostics(const FbsdeCoefficients& coeffs, const PathEnsemble& e,
                                    const MeasureFlow* flow) {
  check_flow(e, flow);
  const int n = e.dims().n, d = e.dims().d, M = e.particles(), P = e.paths();
  const TimeGrid& grid = e.grid();
  const int J = grid.steps;
  const double dt = grid.dt();
  std::vector<double> fwd(P, 0.0), term(P, 0.0);
  std::vector<Eigen::MatrixXd> defect(P, Eigen::MatrixXd::Zero(n, J));
  parallel_for(P, [&](int p) {
    for (int j = 0; j <= J; ++j) {
      const NodeMeasure m(e, flow, j, p);
      const double t = grid.t(j);
      for (int i = 0; i < M; ++i) {
        const std::size_t at = e.entry(j, p, i);
        const Vec x = load_vec(e.X, at, n);
        const Vec y = load_vec(e.Y, at, n);
        if (j == J) {
          term[p] += (y - coeffs.terminal(x, *m)).norm();
          continue;
        }
        const Mat z = load_mat(e.Z, at, n, d), z0 = load_mat(e.Z0, at, n, d);
        const Vec pred = euler_step(x, coeffs.drift(t, x, y, z, z0, *m), coeffs.vol(t, x, y, z, z0, *m),
                                    load_increment(e, j, p, i), dt);
        const Vec next = load_vec(e.X, e.entry(j + 1, p, i), n);
        fwd[p] = std::max(fwd[p], (next - pred).cwiseAbs().maxCoeff());
        const Vec y_next = load_vec(e.Y, e.entry(j + 1, p, i), n);
        defect[p].col(j) += y - y_next - full_driver(coeffs, t, x, y_next, z, z0, *m) * dt;
      }
    }
  });
  ResidualReport r;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, J);
  double term_sum = 0.0;
  for (int p = 0; p < P; ++p) {
    r.forward_residual = std::max(r.forward_residual, fwd[p]);
    term_sum += term[p];
    total += defect[p];
  }
  r.terminal_defect = term_sum / (static_cast<double>(P) * M);
  total /= static_cast<double>(P) * M;
  r.bsde_defect = J > 0 ? total.colwise().norm().maxCoeff() : 0.0;
  return r;
}

std::vector<double> coupled_diagnostic(const PathEnsemble& a, const PathEnsemble& b) {
  if (a.X.size() != b.X.size() || a.paths() != b.paths() || a.particles() != b.particles()) {
    throw MfgError(ErrorCode::SizeMismatch, "coupled ensembles differ in shape");
  }
  const int n = a.dims().n;
  std::vector<double> out(a.nodes(), 0.0);
  for (int j = 0; j < a.nodes(); ++j) {
    double total = 0.0;
    for (int p = 0; p < a.paths(); ++p)
      for (int i = 0; i < a.particles(); ++i) {
        const std::size_t at = a.entry(j, p, i);
        for (int c = 0; c < n; ++c) {
          total += (a.X[at * n + c] - b.X[at * n + c]) * (a.Y[at * n + c] - b.Y[at * n + c]);
        }
      }
    out[j] = total / a.paths();
  }
  return out;
}

}  // namespace mfg
