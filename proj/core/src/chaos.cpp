#include "mfg/chaos.hpp"

#include "mfg/measure.hpp"
#include "mfg/monotone.hpp"
#include "mfg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mfg {

namespace {

Vec control_at(const std::vector<double>& control, std::size_t entry, int k) {
  return Eigen::Map<const Eigen::VectorXd>(&control[entry * k], k);
}

double weight(double r, double t) { return r > 0 ? std::exp(-r * t) : 1.0; }

}  // namespace

ErrorTerms error_terms(const GameSpec& spec, const PathEnsemble& copies, const std::vector<double>& copy_control,
                       const MeasureFlow& flow, int path) {
  const int N = copies.particles(), J = copies.grid().steps, k = spec.dims.k;
  if (flow.paths() != copies.paths() || flow.grid().steps != J) {
    throw MfgError(ErrorCode::SizeMismatch, "flow does not match the copies");
  }
  const double inv = 1.0 / N;
  double eF = 0, eG = 0, eL = 0, eb = 0, es = 0, es0 = 0;
  for (int j = 0; j <= J; ++j) {
    const EmpiricalMeasure mN(copies.slice(j, path));
    const EmpiricalMeasure& mbar = flow.at(j, path);
    for (int i = 0; i < N; ++i) {
      const Vec x = copies.x(j, path, i);
      if (j == J) {
        eG += (inv * spec.DmG(x, mN, x) + spec.DxG(x, mN) - spec.DxG(x, mbar)).squaredNorm();
        continue;
      }
      if (spec.constant_vol()) {
        const auto& cv = *spec.cv;
        eF += (inv * cv.DmF(x, mN, x) + cv.DxF(x, mN) - cv.DxF(x, mbar)).squaredNorm();
      } else if (spec.family == Family::Affine) {
        const Vec a = control_at(copy_control, copies.entry(j, path, i), k);
        const double lx = (inv * spec.DmL(x, a, mN, x) + spec.DxL(x, a, mN) - spec.DxL(x, a, mbar)).norm();
        const double la = (spec.DaL(x, a, mN) - spec.DaL(x, a, mbar)).norm();
        eL += (lx + la) * (lx + la);
      } else {
        const Vec y = copies.y(j, path, i);
        const Mat z = copies.z(j, path, i), z0 = copies.z0(j, path, i);
        const HamiltonianPoint pN{x, y, z, z0, &mN}, pbar{x, y, z, z0, &mbar};
        const HamiltonianDerivatives g = hamiltonian_derivatives(spec, pN);
        const HamiltonianDerivatives gb = hamiltonian_derivatives(spec, pbar);
        eb += (g.Dy - gb.Dy).squaredNorm();
        es += (g.Dz - gb.Dz).squaredNorm();
        es0 += (g.Dz0 - gb.Dz0).squaredNorm();
        eL += (inv * hamiltonian_Dm(spec, pN, x) + g.Dx - gb.Dx).squaredNorm();
      }
    }
  }
  const double running = static_cast<double>(N) * J;
  ErrorTerms out;
  out.G = eG / N;
  if (spec.constant_vol()) {
    out.F = eF / running;
  } else if (spec.family == Family::Affine) {
    out.L = eL / running;
  } else {
    out.L = eL / running;
    out.b = eb / running;
    out.sigma = es / running;
    out.sigma0 = es0 / running;
  }
  return out;
}

std::vector<double> coupled_lyapunov(const PathEnsemble& nplayer, const PathEnsemble& copies) {
  if (nplayer.paths() != copies.paths() || nplayer.particles() != copies.particles() ||
      nplayer.nodes() != copies.nodes() || nplayer.dims().n != copies.dims().n) {
    throw MfgError(ErrorCode::SizeMismatch, "coupled ensembles differ in shape");
  }
  const int n = copies.dims().n;
  std::vector<double> out(copies.nodes(), 0.0);
  for (int j = 0; j < copies.nodes(); ++j) {
    double total = 0.0;
    for (int p = 0; p < copies.paths(); ++p)
      for (int i = 0; i < copies.particles(); ++i) {
        const std::size_t at = copies.entry(j, p, i) * n;
        for (int c = 0; c < n; ++c) {
          total += (nplayer.X[at + c] - copies.X[at + c]) * (nplayer.Y[at + c] - copies.Y[at + c]);
        }
      }
    out[j] = total / copies.paths();
  }
  return out;
}

double rnq(int n, double q, int N) {
  if (!(q > 2)) throw MfgError(ErrorCode::InvalidParams, "q must exceed 2");
  if (n < 1 || N < 1) throw MfgError(ErrorCode::InvalidParams, "n and N must be positive");
  const double Nd = N;
  if (n > 4) return std::pow(Nd, -2.0 / n) + std::pow(Nd, -(q - 2) / 2);
  // At q = 4 every q' in (2, 4) is admissible; the rate is the q' -> 4 limit.
  const double second = std::pow(Nd, -(q - 2) / q);
  if (n < 4) return std::pow(Nd, -0.5) + second;
  return std::pow(Nd, -0.5) * std::log(1 + Nd) + second;
}

ChaosStudyResult run_chaos_study(const GameSpec& spec, const std::vector<int>& Ns, int trials, const TimeGrid& grid,
                                 const SolverConfig& config, const ChaosOptions& options) {
  if (Ns.empty() || trials < 1) throw MfgError(ErrorCode::InvalidParams, "need a ladder and trials");
  for (std::size_t a = 0; a < Ns.size(); ++a) {
    if (Ns[a] < 1 || (a > 0 && Ns[a] <= Ns[a - 1])) {
      throw MfgError(ErrorCode::InvalidParams, "ladder must be strictly increasing and positive");
    }
  }
  if (options.mfe_particles < 1) throw MfgError(ErrorCode::InvalidParams, "mfe particles must be positive");
  ChaosStudyResult result;
  const MfeSolution mfe = solve_mkv(spec, grid, {trials, options.mfe_particles}, config, options.flow);
  for (double q : {2.0, 3.0, 4.0}) {
    double worst = 0.0;
    for (int j = 0; j < grid.nodes(); ++j) {
      double m = 0.0;
      for (int p = 0; p < trials; ++p) m += moment(mfe.flow.at(j, p), q);
      worst = std::max(worst, m / trials);
    }
    result.flow_moments.push_back(worst);
  }

  const int J = grid.steps, k = spec.dims.k;
  const double dt = grid.dt();
  const int w2_node = options.w2_node < 0 ? J : std::min(options.w2_node, J);
  for (int N : Ns) {
    try {
      const PathEnsemble copies = conditionally_independent_copies(mfe, N, player_stream_ids(N));
      const std::vector<double> copy_control = extract_control(spec, copies, mfe.flow);
      const NPlayerSolution nsol = solve_nplayer(spec, N, grid, trials, config);
      const PathEnsemble& e = nsol.ensemble;
      std::vector<ChaosRow> rows(trials);
      parallel_for(trials, [&](int p) {
        ChaosRow& row = rows[p];
        row.N = N;
        row.trial = p;
        row.seed = config.seed;
        double sup_total = 0.0, ctrl_total = 0.0;
        for (int i = 0; i < N; ++i) {
          double sup = 0.0, ctrl = 0.0;
          for (int j = 0; j <= J; ++j) {
            const double w = weight(spec.r, grid.t(j));
            sup = std::max(sup, w * (e.x(j, p, i) - copies.x(j, p, i)).squaredNorm());
            if (j < J) {
              const std::size_t at = e.entry(j, p, i);
              ctrl += w * (control_at(nsol.control, at, k) - control_at(copy_control, at, k)).squaredNorm() * dt;
            }
          }
          sup_total += sup;
          ctrl_total += ctrl;
        }
        row.sup_state_err = sup_total / N;
        row.control_err = ctrl_total / N;
        if (options.chaos_w2) {
          const int kk = options.w2_k > 0 ? std::min(options.w2_k, N) : N;
          row.chaos_w2 = chaos_wasserstein({copies.slice(w2_node, p)}, {e.slice(w2_node, p)}, kk);
        }
        if (options.error_terms) row.terms = error_terms(spec, copies, copy_control, mfe.flow, p);
      });
      std::vector<double> sx, sa, ef, eg;
      for (const auto& row : rows) {
        sx.push_back(row.sup_state_err);
        sa.push_back(row.control_err);
        ef.push_back(row.terms.F.value_or(0.0));
        eg.push_back(row.terms.G.value_or(0.0));
      }
      const MeanSe ms = mean_se(sx), ma = mean_se(sa);
      result.summary.push_back({N, ms.mean, ms.se, ma.mean, ma.se, mean_se(ef).mean, mean_se(eg).mean});
      result.rows.insert(result.rows.end(), rows.begin(), rows.end());
      result.lyapunov.push_back(coupled_lyapunov(e, copies));
      result.offdiag_N.push_back(N);
      result.offdiag_residual.push_back(nsol.offdiag_residual);
      result.Ns.push_back(N);
    } catch (const MfgError& err) {
      result.aborted = "N=" + std::to_string(N) + ": " + err.what();
      break;
    }
  }

  auto fit_of = [&](auto value) -> std::optional<LinearFit> {
    std::vector<double> lx, ly;
    for (const auto& s : result.summary) {
      const double v = value(s);
      if (v > 0) {
        lx.push_back(std::log(static_cast<double>(s.N)));
        ly.push_back(std::log(v));
      }
    }
    if (lx.size() < 2) return std::nullopt;
    return ols(lx, ly);
  };
  result.fit = fit_of([](const ChaosSummary& s) { return s.mean_sup_state_err; });
  if (spec.constant_vol() && options.error_terms) {
    result.fit_eF = fit_of([](const ChaosSummary& s) { return s.mean_eF; });
    result.fit_eG = fit_of([](const ChaosSummary& s) { return s.mean_eG; });
  }
  return result;
}

namespace {

void write_opt(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) out << *v;
}

}  // namespace

void ChaosStudyResult::write_csv(std::ostream& out) const {
  const auto old = out.precision(17);
  out << "N,trial,sup_state_err,control_err,chaos_w2,eF_sq,eG_sq,eL_sq,eb_sq,esigma_sq,esigma0_sq,seed\n";
  for (const auto& r : rows) {
    out << r.N << ',' << r.trial << ',' << r.sup_state_err << ',' << r.control_err;
    write_opt(out, r.chaos_w2);
    write_opt(out, r.terms.F);
    write_opt(out, r.terms.G);
    write_opt(out, r.terms.L);
    write_opt(out, r.terms.b);
    write_opt(out, r.terms.sigma);
    write_opt(out, r.terms.sigma0);
    out << ',' << r.seed << '\n';
  }
  out.precision(old);
}

void ChaosStudyResult::write_summary_csv(std::ostream& out) const {
  const auto old = out.precision(17);
  out << "N,mean_sup_state_err,stderr,fitted_slope,slope_stderr\n";
  for (const auto& s : summary) {
    out << s.N << ',' << s.mean_sup_state_err << ',' << s.stderr_ << ',';
    if (fit) out << fit->slope;
    out << ',';
    if (fit) out << fit->slope_se;
    out << '\n';
  }
  out.precision(old);
}

RiccatiGapStudy riccati_gap_study(const LQParams& params, const std::vector<int>& Ns) {
  RiccatiGapStudy study;
  study.Ns = Ns;
  const RiccatiSolution mfe =
      params.r > 0 ? solve_riccati_stationary(params, 0) : solve_riccati_mfe(params);
  std::vector<double> lx, ly;
  for (int N : Ns) {
    const RiccatiSolution np =
        params.r > 0 ? solve_riccati_stationary(params, N) : solve_riccati_nplayer(params, N);
    const double gap = riccati_gap(np, mfe);
    study.gaps.push_back(gap);
    lx.push_back(std::log(static_cast<double>(N)));
    ly.push_back(std::log(gap));
  }
  study.fit = ols(lx, ly);
  return study;
}

InfiniteHorizonResult run_infinite_horizon_study(const GameSpec& spec, const std::vector<int>& Ns, int trials,
                                                 const std::vector<double>& T_max, double dt,
                                                 const SolverConfig& config, const ChaosOptions& options) {
  if (!(spec.r > 0)) throw MfgError(ErrorCode::InvalidParams, "infinite horizon needs a positive discount");
  if (!spec.constant_vol()) throw MfgError(ErrorCode::WrongFamily, "infinite horizon needs constant volatility");
  const auto& cv = *spec.cv;
  if (!cv.C_L || !cv.C_F) throw MfgError(ErrorCode::InvalidParams, "infinite horizon needs C_L and C_F");
  const MonotonicityReport gate = check_infinite_horizon(spec.r, *cv.C_L, *cv.C_F);
  if (!gate.pass) {
    throw MfgError(ErrorCode::ConditionFailed, "discount too small for the monotonicity constants",
                   gate.estimated_constant);
  }
  if (T_max.empty() || !(dt > 0)) throw MfgError(ErrorCode::InvalidParams, "need horizons and a step size");
  InfiniteHorizonResult out;
  for (double T : T_max) {
    GameSpec truncated = spec;
    truncated.T = T;
    const int steps = static_cast<int>(std::lround(T / dt));
    if (steps < 1) throw MfgError(ErrorCode::InvalidParams, "horizon shorter than one step");
    out.T_max.push_back(T);
    out.studies.push_back(run_chaos_study(truncated, Ns, trials, {T, steps}, config, options));
  }
  for (std::size_t a = 1; a < out.studies.size(); ++a) {
    const auto& prev = out.studies[a - 1].summary;
    const auto& next = out.studies[a].summary;
    double worst = 0.0;
    for (std::size_t b = 0; b < std::min(prev.size(), next.size()); ++b) {
      auto rel = [](double u, double v) { return std::abs(v - u) / std::max(std::abs(u), 1e-300); };
      worst = std::max({worst, rel(prev[b].mean_sup_state_err, next[b].mean_sup_state_err),
                        rel(prev[b].mean_control_err, next[b].mean_control_err)});
    }
    out.truncation_sensitivity.push_back(worst);
  }
  return out;
}

}  // namespace mfg
