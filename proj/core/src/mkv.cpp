#include "mfg/mkv.hpp"

#include "detail.hpp"
#include "mfg/parallel.hpp"
#include "mfg/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

namespace mfg {

using detail::NodeMeasure;

FbsdeCoefficients mkv_coefficients(const GameSpec& spec) {
  FbsdeCoefficients c;
  c.dims = spec.dims;
  c.r = spec.r;
  const int n = spec.dims.n, d = spec.dims.d;
  auto point = [](const Vec& x, const Vec& y, const Mat& z, const Mat& z0, const EmpiricalMeasure& m) {
    return HamiltonianPoint{x, y, z, z0, &m};
  };
  c.drift = [spec, point](double, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                          const EmpiricalMeasure& m) {
    const Vec a = minimizer_alpha(spec, point(x, y, z, z0, m));
    return Vec(spec.b(x, a, m));
  };
  c.vol = [spec, point, n, d](double, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                              const EmpiricalMeasure& m) {
    WideMat v(n, 2 * d);
    if (spec.constant_vol()) {
      v << spec.cv->Sigma, spec.cv->Sigma0;
      return v;
    }
    const Vec a = minimizer_alpha(spec, point(x, y, z, z0, m));
    v << spec.sigma(x, a, m), spec.sigma0(x, a, m);
    return v;
  };
  c.driver = [spec, point](double, const Vec& x, const Vec& y, const Mat& z, const Mat& z0,
                           const EmpiricalMeasure& m) {
    return hamiltonian_derivatives(spec, point(x, y, z, z0, m)).Dx;
  };
  c.terminal = [spec](const Vec& x, const EmpiricalMeasure& m) { return Vec(spec.DxG(x, m)); };
  return c;
}

Vec MfeSolution::alpha(int node, int path, int particle) const {
  const int k = spec.dims.k;
  return Eigen::Map<const Eigen::VectorXd>(&control[ensemble.entry(node, path, particle) * k], k);
}

std::vector<double> extract_control(const GameSpec& spec, const PathEnsemble& e, const MeasureFlow& flow) {
  const int k = spec.dims.k, M = e.particles();
  std::vector<double> control(static_cast<std::size_t>(e.nodes()) * e.paths() * M * k);
  parallel_for(e.paths(), [&](int p) {
    for (int j = 0; j < e.nodes(); ++j) {
      const EmpiricalMeasure& m = flow.at(j, p);
      for (int i = 0; i < M; ++i) {
        const Vec a = minimizer_alpha(spec, HamiltonianPoint{e.x(j, p, i), e.y(j, p, i), e.z(j, p, i),
                                                             e.z0(j, p, i), &m});
        std::copy(a.data(), a.data() + k, &control[e.entry(j, p, i) * k]);
      }
    }
  });
  return control;
}

namespace {

// Max over nodes of the path-averaged matched-coupling bound on W2^2.
double flow_change(const PathEnsemble& a, const PathEnsemble& b) {
  const int n = a.dims().n, M = a.particles(), P = a.paths();
  double worst = 0.0;
  for (int j = 0; j < a.nodes(); ++j) {
    double total = 0.0;
    for (int p = 0; p < P; ++p)
      for (int i = 0; i < M; ++i) {
        const std::size_t at = a.entry(j, p, i) * n;
        for (int c = 0; c < n; ++c) {
          const double diff = a.X[at + c] - b.X[at + c];
          total += diff * diff;
        }
      }
    worst = std::max(worst, total / (static_cast<double>(P) * M));
  }
  return worst;
}

Vec control_at(const std::vector<double>& control, std::size_t entry, int k) {
  return Eigen::Map<const Eigen::VectorXd>(&control[entry * k], k);
}

}  // namespace

PathEnsemble resimulate(const GameSpec& spec, const PathEnsemble& base, const std::vector<double>& control,
                        const MeasureFlow* flow) {
  PathEnsemble e = base;
  const int n = spec.dims.n, d = spec.dims.d, k = spec.dims.k, M = e.particles();
  const double dt = e.grid().dt();
  parallel_for(e.paths(), [&](int p) {
    for (int j = 0; j < e.grid().steps; ++j) {
      const NodeMeasure m(e, flow, j, p);
      for (int i = 0; i < M; ++i) {
        const std::size_t at = e.entry(j, p, i);
        const Vec x = e.x(j, p, i);
        const Vec a = control_at(control, at, k);
        WideMat vol(n, 2 * d);
        vol << spec.sigma(x, a, *m), spec.sigma0(x, a, *m);
        const Vec next = euler_step(x, spec.b(x, a, *m), vol, e.increment(j, p, i), dt);
        if (!next.allFinite()) throw MfgError(ErrorCode::NonFiniteState, "re-simulated state is not finite");
        e.set_x(j + 1, p, i, next);
      }
    }
  });
  return e;
}

std::vector<double> path_costs(const GameSpec& spec, const PathEnsemble& e, const std::vector<double>& control,
                               const MeasureFlow* flow) {
  const int k = spec.dims.k, M = e.particles(), J = e.grid().steps;
  const double dt = e.grid().dt();
  std::vector<double> out(e.paths(), 0.0);
  parallel_for(e.paths(), [&](int p) {
    double total = 0.0;
    for (int j = 0; j <= J; ++j) {
      const NodeMeasure m(e, flow, j, p);
      const double weight = spec.r > 0 ? std::exp(-spec.r * e.grid().t(j)) : 1.0;
      double node = 0.0;
      for (int i = 0; i < M; ++i) {
        const Vec x = e.x(j, p, i);
        if (j < J) {
          node += spec.L(x, control_at(control, e.entry(j, p, i), k), *m) * dt;
        } else {
          node += spec.G(x, *m);
        }
      }
      total += weight * node;
    }
    out[p] = total / M;
  });
  return out;
}

namespace {

CostEstimate summarize(const std::vector<double>& values) {
  CostEstimate c;
  const double P = static_cast<double>(values.size());
  for (double v : values) c.mean += v;
  c.mean /= P;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - c.mean) * (v - c.mean);
    c.stderr_ = std::sqrt(ss / (P - 1) / P);
  }
  return c;
}

void finalize(MfeSolution& sol) {
  sol.flow = MeasureFlow::from_ensemble(sol.ensemble);
  sol.control = extract_control(sol.spec, sol.ensemble, sol.flow);
}

}  // namespace

MfeSolution solve_mkv(const GameSpec& spec, const TimeGrid& grid, const EnsembleLayout& layout,
                      const SolverConfig& config, const FlowConfig& flow_config) {
  spec.validate();
  grid.validate();
  config.validate();
  if (!(flow_config.flow_tol > 0) || flow_config.max_outer < 1) {
    throw MfgError(ErrorCode::InvalidParams, "flow tolerance and iteration budget must be positive");
  }
  MfeSolution sol;
  sol.spec = spec;
  sol.seed = config.seed;
  const NoiseStreams streams(config.seed);
  sol.ensemble = PathEnsemble::sample(spec.dims, grid, layout, streams, spec.m0);

  // Initial flow: the uncontrolled dynamics.
  const std::vector<double> zero(static_cast<std::size_t>(grid.nodes()) * layout.paths * layout.particles *
                                     spec.dims.k,
                                 0.0);
  PathEnsemble previous = resimulate(spec, sol.ensemble, zero, nullptr);
  sol.ensemble.X = previous.X;

  const FbsdeCoefficients coeffs = mkv_coefficients(spec);
  for (int outer = 1; outer <= flow_config.max_outer; ++outer) {
    SolveLog log;
    if (config.method == SolverMethod::Continuation) {
      log = continuation_solve(coeffs, sol.ensemble, nullptr, config, sol.maps);
    } else {
      log = picard_solve(coeffs, sol.ensemble, nullptr, config, &sol.maps);
      forward_pass_feedback(coeffs, sol.ensemble, sol.maps, nullptr);
    }
    sol.log.residuals.insert(sol.log.residuals.end(), log.residuals.begin(), log.residuals.end());
    sol.log.steps.insert(sol.log.steps.end(), log.steps.begin(), log.steps.end());
    sol.log.sweeps += log.sweeps;
    const double change = flow_change(previous, sol.ensemble);
    sol.flow_changes.push_back(change);
    sol.outer_iterations = outer;
    if (change <= flow_config.flow_tol) {
      sol.log.converged = true;
      finalize(sol);
      return sol;
    }
    previous = sol.ensemble;
  }
  throw MfgError(ErrorCode::FlowNoConvergence, "measure flow did not settle", sol.flow_changes.back());
}

PathEnsemble conditionally_independent_copies(const MfeSolution& sol, int N,
                                              const std::vector<std::uint32_t>& particle_ids) {
  if (N < 1) throw MfgError(ErrorCode::InvalidParams, "need at least one copy");
  if (!particle_ids.empty() && static_cast<int>(particle_ids.size()) != N) {
    throw MfgError(ErrorCode::SizeMismatch, "one stream coordinate per copy");
  }
  const NoiseStreams streams(sol.seed);
  PathEnsemble e = PathEnsemble::sample(sol.spec.dims, sol.ensemble.grid(), {sol.ensemble.paths(), N}, streams,
                                        sol.spec.m0, particle_ids);
  forward_pass_feedback(mkv_coefficients(sol.spec), e, sol.maps, &sol.flow);
  return e;
}

CostEstimate mfe_cost(const MfeSolution& sol) {
  return summarize(path_costs(sol.spec, sol.ensemble, sol.control, &sol.flow));
}

bool OptimalityReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

OptimalityReport mfe_optimality_check(const MfeSolution& sol, const std::vector<double>& eps) {
  const GameSpec& spec = sol.spec;
  const PathEnsemble& e = sol.ensemble;
  const int k = spec.dims.k, M = e.particles(), J = e.grid().steps;
  const double T = e.grid().T;
  const PathEnsemble base = resimulate(spec, e, sol.control, &sol.flow);
  const std::vector<double> base_cost = path_costs(spec, base, sol.control, &sol.flow);

  struct Direction {
    const char* name;
    std::function<Vec(double t, const Vec& a)> eta;
  };
  const Vec unit = Vec::Ones(k) / std::sqrt(static_cast<double>(k));
  const std::vector<Direction> directions = {
      {"constant", [unit](double, const Vec&) { return unit; }},
      {"cosine", [unit, T](double t, const Vec&) { return Vec(std::cos(std::numbers::pi * t / T) * unit); }},
      {"scaling", [](double, const Vec& a) { return a; }},
  };

  OptimalityReport report;
  for (double h : eps) {
    for (const auto& dir : directions) {
      for (double sign : {1.0, -1.0}) {
        std::vector<double> control = sol.control;
        for (int j = 0; j < J; ++j)
          for (int p = 0; p < e.paths(); ++p)
            for (int i = 0; i < M; ++i) {
              const std::size_t at = e.entry(j, p, i);
              const Vec a = control_at(sol.control, at, k);
              const Vec shifted = a + sign * h * dir.eta(e.grid().t(j), a);
              std::copy(shifted.data(), shifted.data() + k, &control[at * k]);
            }
        const PathEnsemble moved = resimulate(spec, e, control, &sol.flow);
        const std::vector<double> cost = path_costs(spec, moved, control, &sol.flow);
        std::vector<double> diff(cost.size());
        for (std::size_t p = 0; p < cost.size(); ++p) diff[p] = cost[p] - base_cost[p];
        const CostEstimate s = summarize(diff);
        OptimalityCheck c;
        c.eps = sign * h;
        c.direction = dir.name;
        c.mean_diff = s.mean;
        c.stderr_ = s.stderr_;
        c.pass = s.mean >= -report.tolerance_se * s.stderr_ - 1e-14;
        report.checks.push_back(c);
      }
    }
  }
  return report;
}

double drift_control_residual(const MfeSolution& sol) {
  if (!sol.spec.constant_vol()) {
    throw MfgError(ErrorCode::WrongFamily, "drift-control identity needs constant volatility");
  }
  PathEnsemble fresh = sol.ensemble;
  backward_pass(mkv_coefficients(sol.spec), fresh, &sol.flow);
  const auto& cv = *sol.spec.cv;
  const int k = sol.spec.dims.k, M = fresh.particles();
  double total = 0.0;
  std::size_t count = 0;
  for (int j = 0; j < fresh.grid().steps; ++j)
    for (int p = 0; p < fresh.paths(); ++p)
      for (int i = 0; i < M; ++i) {
        const Vec x = fresh.x(j, p, i);
        const Vec a = control_at(sol.control, fresh.entry(j, p, i), k);
        total += (fresh.y(j, p, i) + cv.DaL0(x, a)).squaredNorm();
        ++count;
      }
  return std::sqrt(total / static_cast<double>(count));
}

void MfeSolution::write(std::ostream& out) const {
  ensemble.write(out);
  out.write("MFGFLOW1", 8);
  write_f64(out, {spec.r});
  write_u64(out, static_cast<std::uint64_t>(outer_iterations));
  write_u64(out, static_cast<std::uint64_t>(spec.dims.k));
  write_f64(out, control);
  for (const auto& m : flow.measures()) {
    write_u64(out, static_cast<std::uint64_t>(m.size()));
    const Eigen::MatrixXd& atoms = m.atoms();
    write_f64(out, std::vector<double>(atoms.data(), atoms.data() + atoms.size()));
  }
}

MfeData read_mfe(std::istream& in) {
  MfeData data;
  data.ensemble = PathEnsemble::read(in);
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != "MFGFLOW1") {
    throw MfgError(ErrorCode::SchemaError, "missing flow section");
  }
  data.r = read_f64(in, 1)[0];
  data.outer_iterations = static_cast<int>(read_u64(in));
  const auto k = read_u64(in);
  const PathEnsemble& e = data.ensemble;
  data.control = read_f64(in, static_cast<std::size_t>(e.nodes()) * e.paths() * e.particles() * k);
  const int n = e.dims().n;
  std::vector<EmpiricalMeasure> measures;
  measures.reserve(static_cast<std::size_t>(e.nodes()) * e.paths());
  for (int q = 0; q < e.nodes() * e.paths(); ++q) {
    const auto size = read_u64(in);
    const std::vector<double> raw = read_f64(in, size * n);
    measures.emplace_back(
        Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(raw.data(), n, static_cast<Eigen::Index>(size))));
  }
  data.flow = MeasureFlow(e.grid(), e.paths(), std::move(measures));
  return data;
}

}  // namespace mfg
