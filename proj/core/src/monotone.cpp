#include "mfg/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace mfg {

const char* to_string(Condition c) {
  switch (c) {
    case Condition::DisplacementC: return "DisplacementC";
    case Condition::ConstantVolTradeoff: return "ConstantVolTradeoff";
    case Condition::AffineLagrangian: return "AffineLagrangian";
    case Condition::HamiltonianCH: return "HamiltonianCH";
    case Condition::InfiniteHorizon: return "InfiniteHorizon";
  }
  return "?";
}

std::string MonotonicityReport::describe() const {
  std::ostringstream out;
  out.precision(12);
  out << "condition: " << to_string(condition) << "\n"
      << "verdict: " << (pass ? "pass" : "fail") << "\n"
      << "estimated_constant: " << estimated_constant << "\n"
      << "trials: " << trials << "\n";
  auto dump = [&out](const char* label, const Configuration& c) {
    out << label << ": N=" << c.x.size() << " slack=" << c.slack << " ratio=" << c.ratio << "\n";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out << "  x[" << i << "]=" << c.x[i].transpose() << " xbar[" << i << "]=" << c.xbar[i].transpose() << "\n";
    }
  };
  if (violation) {
    out << "first_violation_trial: " << first_violation_trial << "\n";
    dump("violation", *violation);
  }
  return out.str();
}

namespace {

using Rng = std::mt19937_64;

Rng trial_rng(std::uint64_t seed, int N, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(trial)};
  return Rng(seq);
}

Vec gaussian_vec(Rng& rng, int n, double scale) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int c = 0; c < n; ++c) v[c] = scale * normal(rng);
  return v;
}

Mat gaussian_mat(Rng& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = scale * normal(rng);
  return m;
}

EmpiricalMeasure cloud(const std::vector<Vec>& pts) {
  Eigen::MatrixXd atoms(pts.front().size(), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) atoms.col(static_cast<Eigen::Index>(i)) = pts[i];
  return EmpiricalMeasure(std::move(atoms));
}

void validate_plan(const SamplingPlan& plan) {
  if (plan.Ns.empty() || plan.trials < 1 || plan.scales.empty()) {
    throw MfgError(ErrorCode::InvalidParams, "sampling plan needs sizes, trials and scales");
  }
  for (int N : plan.Ns)
    if (N < 1) throw MfgError(ErrorCode::InvalidParams, "sample sizes must be positive");
  for (double s : plan.scales)
    if (!(s > 0)) throw MfgError(ErrorCode::InvalidParams, "scales must be positive");
}

// Runs the sampling loop; draw() fills a configuration with slack and ratio.
template <class Draw>
MonotonicityReport sample_condition(Condition cond, const SamplingPlan& plan, Draw draw) {
  validate_plan(plan);
  MonotonicityReport report;
  report.condition = cond;
  bool first = true;
  for (int N : plan.Ns) {
    for (int t = 0; t < plan.trials; ++t) {
      Rng rng = trial_rng(plan.seed, N, t);
      const double scale = plan.scales[t % plan.scales.size()];
      Configuration c = draw(rng, N, t, scale);
      ++report.trials;
      if (first || c.ratio < report.estimated_constant) {
        report.estimated_constant = c.ratio;
        report.worst_sample = c;
        first = false;
      }
      if (c.slack < -report.tolerance && !report.violation) {
        report.violation = c;
        report.first_violation_trial = report.trials;
        report.pass = false;
      }
    }
  }
  return report;
}

double safe_ratio(double form, double norm) {
  return norm > 0 ? form / norm : std::numeric_limits<double>::infinity();
}

}  // namespace

MonotonicityReport check_displacement(const DisplacementField& DU, int n, double c, const SamplingPlan& plan) {
  if (n < 1 || n > kMaxDim) throw MfgError(ErrorCode::InvalidParams, "state dimension out of range");
  return sample_condition(Condition::DisplacementC, plan, [&](Rng& rng, int N, int, double scale) {
    Configuration s;
    for (int i = 0; i < N; ++i) {
      s.x.push_back(gaussian_vec(rng, n, scale));
      s.xbar.push_back(gaussian_vec(rng, n, scale));
    }
    const EmpiricalMeasure m = cloud(s.x), mbar = cloud(s.xbar);
    double form = 0.0, norm = 0.0;
    for (int i = 0; i < N; ++i) {
      const Vec dx = s.x[i] - s.xbar[i];
      form += (DU(s.x[i], m) - DU(s.xbar[i], mbar)).dot(dx);
      norm += dx.squaredNorm();
    }
    s.slack = form - c * norm;
    s.ratio = safe_ratio(form, norm);
    return s;
  });
}

MonotonicityReport check_constantvol_tradeoff(double C_L, double C_F, double C_G, double T) {
  if (!(C_L > 0)) throw MfgError(ErrorCode::InvalidParams, "C_L must be positive");
  if (!(T > 0)) throw MfgError(ErrorCode::InvalidParams, "horizon must be positive");
  MonotonicityReport r;
  r.condition = Condition::ConstantVolTradeoff;
  r.estimated_constant = C_L + std::min(C_G, 0.0) * T + std::min(C_F, 0.0) * T * T / 2;
  r.pass = r.estimated_constant > 0;
  return r;
}

MonotonicityReport check_infinite_horizon(double r, double C_L, double C_F) {
  if (!(r > 0)) throw MfgError(ErrorCode::InvalidParams, "discount must be positive");
  if (!(C_L > 0)) throw MfgError(ErrorCode::InvalidParams, "C_L must be positive");
  MonotonicityReport rep;
  rep.condition = Condition::InfiniteHorizon;
  const double cf_minus = -std::min(C_F, 0.0);
  rep.estimated_constant = r * r - 4 * cf_minus / C_L;
  rep.pass = rep.estimated_constant > 0;
  return rep;
}

MonotonicityReport check_affine_lagrangian(const GameSpec& spec, double C_L, const SamplingPlan& plan) {
  if (spec.family != Family::Affine) throw MfgError(ErrorCode::WrongFamily, "affine Lagrangian check");
  const int n = spec.dims.n, k = spec.dims.k;
  return sample_condition(Condition::AffineLagrangian, plan, [&](Rng& rng, int N, int t, double scale) {
    Configuration s;
    for (int i = 0; i < N; ++i) {
      s.x.push_back(gaussian_vec(rng, n, scale));
      s.xbar.push_back(gaussian_vec(rng, n, scale));
      s.a.push_back(gaussian_vec(rng, k, scale));
      s.abar.push_back(gaussian_vec(rng, k, scale));
    }
    // Every third trial moves only the controls.
    if (t % 3 == 1) s.xbar = s.x;
    const EmpiricalMeasure m = cloud(s.x), mbar = cloud(s.xbar);
    double form = 0.0, norm = 0.0;
    for (int i = 0; i < N; ++i) {
      const Vec dx = s.x[i] - s.xbar[i], da = s.a[i] - s.abar[i];
      form += (spec.DxL(s.x[i], s.a[i], m) - spec.DxL(s.xbar[i], s.abar[i], mbar)).dot(dx);
      form += (spec.DaL(s.x[i], s.a[i], m) - spec.DaL(s.xbar[i], s.abar[i], mbar)).dot(da);
      norm += da.squaredNorm();
    }
    s.slack = form - C_L * norm;
    s.ratio = safe_ratio(form, norm);
    return s;
  });
}

HamiltonianGradient hamiltonian_gradient(const GameSpec& spec, const HamiltonianPoint& p) {
  HamiltonianGradient g;
  if (spec.family != Family::General) {
    const HamiltonianDerivatives d = hamiltonian_derivatives(spec, p);
    g.Dx = d.Dx;
    g.Dy = d.Dy;
    g.Dz = d.Dz;
    g.Dz0 = d.Dz0;
    return g;
  }
  constexpr double h = 1e-5;
  auto central = [&](auto& slot, int idx) {
    HamiltonianPoint up = p, dn = p;
    auto& u = slot(up);
    auto& d = slot(dn);
    u.data()[idx] += h;
    d.data()[idx] -= h;
    return (hamiltonian(spec, up) - hamiltonian(spec, dn)) / (2 * h);
  };
  const int n = static_cast<int>(p.x.size());
  g.Dx.resize(n);
  g.Dy.resize(n);
  g.Dz.resize(p.z.rows(), p.z.cols());
  g.Dz0.resize(p.z0.rows(), p.z0.cols());
  auto sx = [](HamiltonianPoint& q) -> Vec& { return q.x; };
  auto sy = [](HamiltonianPoint& q) -> Vec& { return q.y; };
  auto sz = [](HamiltonianPoint& q) -> Mat& { return q.z; };
  auto sz0 = [](HamiltonianPoint& q) -> Mat& { return q.z0; };
  for (int c = 0; c < n; ++c) {
    g.Dx[c] = central(sx, c);
    g.Dy[c] = central(sy, c);
  }
  for (int c = 0; c < g.Dz.size(); ++c) g.Dz.data()[c] = central(sz, c);
  for (int c = 0; c < g.Dz0.size(); ++c) g.Dz0.data()[c] = central(sz0, c);
  return g;
}

MonotonicityReport check_hamiltonian_CH(const GameSpec& spec, double C_H, const SamplingPlan& plan) {
  const int n = spec.dims.n, d = spec.dims.d;
  return sample_condition(Condition::HamiltonianCH, plan, [&](Rng& rng, int N, int t, double scale) {
    Configuration s;
    for (int i = 0; i < N; ++i) {
      s.x.push_back(gaussian_vec(rng, n, scale));
      s.xbar.push_back(gaussian_vec(rng, n, scale));
      s.y.push_back(gaussian_vec(rng, n, scale));
      s.ybar.push_back(gaussian_vec(rng, n, scale));
      s.z.push_back(gaussian_mat(rng, n, d, scale));
      s.zbar.push_back(gaussian_mat(rng, n, d, scale));
      s.z0.push_back(gaussian_mat(rng, n, d, scale));
      s.z0bar.push_back(gaussian_mat(rng, n, d, scale));
    }
    // Degenerate modes: trial t % 4 == 1 freezes y, 2 freezes (z, z0),
    // 3 freezes all adjoint blocks.
    const int mode = t % 4;
    if (mode == 1 || mode == 3) s.ybar = s.y;
    if (mode == 2 || mode == 3) {
      s.zbar = s.z;
      s.z0bar = s.z0;
    }
    const EmpiricalMeasure m = cloud(s.x), mbar = cloud(s.xbar);
    double form = 0.0, norm = 0.0;
    for (int i = 0; i < N; ++i) {
      const HamiltonianGradient g = hamiltonian_gradient(spec, {s.x[i], s.y[i], s.z[i], s.z0[i], &m});
      const HamiltonianGradient gb =
          hamiltonian_gradient(spec, {s.xbar[i], s.ybar[i], s.zbar[i], s.z0bar[i], &mbar});
      const Vec dx = s.x[i] - s.xbar[i];
      form += -(g.Dx - gb.Dx).dot(dx);
      form += (g.Dy - gb.Dy).dot(s.y[i] - s.ybar[i]);
      form += frob(g.Dz - gb.Dz, s.z[i] - s.zbar[i]);
      form += frob(g.Dz0 - gb.Dz0, s.z0[i] - s.z0bar[i]);
      norm += dx.squaredNorm();
    }
    // The inequality reads form <= -C_H norm.
    s.slack = -C_H * norm - form;
    s.ratio = safe_ratio(-form, norm);
    return s;
  });
}

}  // namespace mfg
