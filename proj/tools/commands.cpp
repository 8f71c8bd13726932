#include "commands.hpp"

#include "mfg/chaos.hpp"
#include "mfg/monotone.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/parallel.hpp"
#include "mfg/riccati.hpp"
#include "svg.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace mfglab {

using mfg::ErrorCode;
using mfg::MfgError;

ExitCode exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError:
    case ErrorCode::InvalidParams:
    case ErrorCode::SizeMismatch:
    case ErrorCode::WrongFamily:
    case ErrorCode::IndexOutOfRange:
      return kUsageError;
    case ErrorCode::NoConvergence:
    case ErrorCode::HomotopyStall:
    case ErrorCode::FlowNoConvergence:
    case ErrorCode::NonFiniteState:
    case ErrorCode::BlowUp:
    case ErrorCode::SingularRegression:
    case ErrorCode::StudyAborted:
    case ErrorCode::StreamExhausted:
      return kSolverFailure;
    case ErrorCode::ConditionFailed:
    case ErrorCode::NonConvexMinimization:
      return kDomainFailure;
  }
  return kDomainFailure;
}

namespace {

bool want_csv(Format f) { return f != Format::Svg; }
bool want_svg(Format f) { return f != Format::Csv; }

void write_file(const std::filesystem::path& path, const std::string& content, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw MfgError(ErrorCode::InvalidParams, "cannot write " + path.string());
  f << content;
}

const mfg::ConstantVolData& constant_vol_data(const mfg::GameSpec& spec) {
  if (!spec.cv || !spec.cv->C_L || !spec.cv->C_F) {
    throw MfgError(ErrorCode::WrongFamily, "structural constants are unavailable for this family");
  }
  return *spec.cv;
}

double relative_error(double value, double oracle) {
  const double diff = std::abs(value - oracle);
  return std::abs(oracle) > 1e-12 ? diff / std::abs(oracle) : diff;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

int cmd_check_monotone(const Scenario& s, const CommandOptions& opt, std::ostream& out) {
  const mfg::GameSpec spec = game_spec(s);
  const auto& cv = constant_vol_data(spec);
  mfg::SamplingPlan plan;
  plan.seed = s.seed;
  const int n = spec.dims.n;

  std::vector<mfg::MonotonicityReport> reports;
  const mfg::DisplacementField DxF = [&cv](const mfg::Vec& x, const mfg::EmpiricalMeasure& m) { return cv.DxF(x, m); };
  reports.push_back(mfg::check_displacement(DxF, n, *cv.C_F, plan));
  if (spec.C_G) {
    const mfg::DisplacementField DxG = [&spec](const mfg::Vec& x, const mfg::EmpiricalMeasure& m) {
      return spec.DxG(x, m);
    };
    reports.push_back(mfg::check_displacement(DxG, n, *spec.C_G, plan));
  }
  if (spec.r > 0) {
    reports.push_back(mfg::check_infinite_horizon(spec.r, *cv.C_L, *cv.C_F));
  } else {
    reports.push_back(mfg::check_constantvol_tradeoff(*cv.C_L, *cv.C_F, spec.C_G.value_or(0.0), spec.T));
  }

  std::ostringstream report;
  bool pass = true;
  const char* labels[] = {"F displacement", "G displacement", "structural margin"};
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const char* label = reports.size() == 3 ? labels[i] : (i == 0 ? labels[0] : labels[2]);
    report << "[" << label << "]\n" << reports[i].describe() << "\n";
    pass = pass && reports[i].pass;
  }
  report << "overall: " << (pass ? "pass" : "fail") << "\n";
  out << report.str();
  if (!opt.out.empty()) write_file(opt.out, report.str());
  return pass ? kOk : kDomainFailure;
}

int cmd_solve_mkv(const Scenario& s, const CommandOptions& opt, std::ostream& out) {
  const mfg::GameSpec spec = game_spec(s);
  if (spec.r > 0) {
    const auto& cv = constant_vol_data(spec);
    const auto rep = mfg::check_infinite_horizon(spec.r, *cv.C_L, *cv.C_F);
    if (!rep.pass) {
      out << rep.describe();
      return kDomainFailure;
    }
  }
  const mfg::MfeSolution sol =
      mfg::solve_mkv(spec, time_grid(s), {s.ensemble.paths, s.ensemble.particles}, solver_config(s), flow_config(s));
  const auto& e = sol.ensemble;
  mfg::Vec y0 = mfg::Vec::Zero(spec.dims.n);
  for (int p = 0; p < s.ensemble.paths; ++p)
    for (int i = 0; i < s.ensemble.particles; ++i) y0 += e.y(0, p, i);
  y0 /= static_cast<double>(s.ensemble.paths) * s.ensemble.particles;
  const mfg::CostEstimate cost = mfg::mfe_cost(sol);

  out << std::setprecision(10);
  out << "Y0 mean:";
  for (int c = 0; c < y0.size(); ++c) out << ' ' << y0[c];
  out << "\ncost: " << cost.mean << " (stderr " << cost.stderr_ << ")\n"
      << "outer iterations: " << sol.outer_iterations << "\n"
      << "sweeps: " << sol.log.sweeps << "\n";
  if (!opt.out.empty()) {
    std::ofstream f(opt.out, std::ios::binary);
    if (!f) throw MfgError(ErrorCode::InvalidParams, "cannot write " + opt.out);
    sol.write(f);
    out << "wrote " << opt.out << "\n";
  }
  return kOk;
}

namespace {

void emit_study(const mfg::ChaosStudyResult& r, const std::filesystem::path& dir, const std::string& stem,
                Format format, const std::string& title) {
  if (want_csv(format)) {
    std::ostringstream trials, summary;
    r.write_csv(trials);
    r.write_summary_csv(summary);
    write_file(dir / (stem + "_trials.csv"), trials.str());
    write_file(dir / (stem + "_summary.csv"), summary.str());
  }
  if (want_svg(format)) {
    LogLogPlot plot;
    plot.title = title;
    plot.xlabel = "N";
    plot.ylabel = "mean sup_state_err";
    for (const auto& row : r.summary) {
      plot.x.push_back(row.N);
      plot.y.push_back(row.mean_sup_state_err);
    }
    plot.fit = r.fit;
    write_file(dir / (stem + "_rate.svg"), render_svg(plot));
  }
}

void print_study(const mfg::ChaosStudyResult& r, std::ostream& out) {
  out << std::setprecision(6);
  for (const auto& row : r.summary) {
    out << "N=" << row.N << " mean_sup_state_err=" << row.mean_sup_state_err << " (stderr " << row.stderr_ << ")\n";
  }
  if (r.fit) out << "fitted slope: " << r.fit->slope << " (stderr " << r.fit->slope_se << ")\n";
  if (!r.aborted.empty()) out << "aborted: " << r.aborted << "\n";
}

std::string tmax_tag(double T) {
  std::ostringstream s;
  s << T;
  return s.str();
}

}  // namespace

int cmd_chaos_study(const Scenario& s, const CommandOptions& opt, std::ostream& out) {
  const mfg::GameSpec spec = game_spec(s);
  const std::filesystem::path dir = opt.out.empty() ? std::filesystem::path(".") : std::filesystem::path(opt.out);
  std::filesystem::create_directories(dir);
  const mfg::ChaosOptions options = chaos_options(s);

  if (!s.study.T_max_ladder.empty()) {
    if (!(spec.r > 0)) throw MfgError(ErrorCode::SchemaError, "T_max_ladder needs a discounted scenario");
    const double dt = s.grid.horizon() / s.grid.steps;
    const mfg::InfiniteHorizonResult res = mfg::run_infinite_horizon_study(
        spec, s.study.Ns, s.study.trials, s.study.T_max_ladder, dt, solver_config(s), options);
    bool aborted = false;
    for (std::size_t a = 0; a < res.studies.size(); ++a) {
      const std::string tag = tmax_tag(res.T_max[a]);
      out << "T_max=" << tag << "\n";
      print_study(res.studies[a], out);
      emit_study(res.studies[a], dir, "chaos_Tmax" + tag, opt.format, "T_max = " + tag);
      aborted = aborted || !res.studies[a].aborted.empty();
    }
    std::ostringstream sens;
    sens << std::setprecision(17) << "T_max_from,T_max_to,sensitivity\n";
    for (std::size_t a = 0; a < res.truncation_sensitivity.size(); ++a) {
      sens << res.T_max[a] << ',' << res.T_max[a + 1] << ',' << res.truncation_sensitivity[a] << '\n';
      out << "truncation sensitivity " << tmax_tag(res.T_max[a]) << " -> " << tmax_tag(res.T_max[a + 1]) << ": "
          << res.truncation_sensitivity[a] << "\n";
    }
    if (want_csv(opt.format)) write_file(dir / "truncation.csv", sens.str());
    return aborted ? kSolverFailure : kOk;
  }

  const mfg::ChaosStudyResult res =
      mfg::run_chaos_study(spec, s.study.Ns, s.study.trials, time_grid(s), solver_config(s), options);
  print_study(res, out);
  emit_study(res, dir, "chaos", opt.format, "propagation of chaos");
  return res.aborted.empty() ? kOk : kSolverFailure;
}

std::vector<ValidationRow> lq_validation(const Scenario& s) {
  const mfg::GameSpec spec = game_spec(s);
  if (!spec.lq) throw MfgError(ErrorCode::WrongFamily, "validation needs a quadratic scenario");
  const mfg::LQParams& P = *spec.lq;
  const auto& tol = s.study.tolerances;
  const mfg::TimeGrid grid = time_grid(s);
  const mfg::SolverConfig config = solver_config(s);
  std::vector<ValidationRow> rows;
  auto add = [&rows](std::string name, double value, double oracle, double error, double tolerance) {
    rows.push_back({std::move(name), value, oracle, error, tolerance, error <= tolerance});
  };

  const mfg::MfeSolution sol =
      mfg::solve_mkv(spec, grid, {s.ensemble.paths, s.ensemble.particles}, config, flow_config(s));
  const mfg::RiccatiSolution ric = mfg::solve_riccati_mfe(P);
  double y0 = 0.0;
  for (int p = 0; p < s.ensemble.paths; ++p)
    for (int i = 0; i < s.ensemble.particles; ++i) y0 += sol.ensemble.y(0, p, i)[0];
  y0 /= static_cast<double>(s.ensemble.paths) * s.ensemble.particles;
  const double y0_oracle = mfg::riccati_y0_mean(P, ric)[0];
  add("Y0 mean", y0, y0_oracle, relative_error(y0, y0_oracle), tol.y0);
  const double cost = mfg::mfe_cost(sol).mean, cost_oracle = mfg::riccati_mfe_cost(P, ric);
  add("cost", cost, cost_oracle, relative_error(cost, cost_oracle), tol.cost);

  if (!s.study.Ns.empty()) {
    const int N = s.study.Ns.front();
    const mfg::NPlayerSolution np = mfg::solve_nplayer(spec, N, grid, s.ensemble.paths, config);
    mfg::PathEnsemble oracle = np.ensemble;
    mfg::oracle_paths_inplace(mfg::solve_riccati_nplayer(P, N), P, oracle);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < oracle.X.size(); ++i) {
      num = std::max(num, std::abs(oracle.X[i] - np.ensemble.X[i]));
      den = std::max(den, std::abs(oracle.X[i]));
    }
    add("N-player X (N=" + std::to_string(N) + ")", num, den, den > 0 ? num / den : num, tol.nplayer);
  }

  if (s.study.Ns.size() >= 2) {
    std::vector<double> gaps;
    for (int N : s.study.Ns) {
      const bool stationary = P.r > 0;
      const auto nplayer = stationary ? mfg::solve_riccati_stationary(P, N) : mfg::solve_riccati_nplayer(P, N);
      const auto mfe = stationary ? mfg::solve_riccati_stationary(P, 0) : ric;
      gaps.push_back(mfg::riccati_gap(nplayer, mfe));
    }
    const bool all_zero = std::all_of(gaps.begin(), gaps.end(), [](double g) { return g <= 1e-14; });
    if (all_zero) {
      add("Riccati gap (identically 0)", 0.0, 0.0, 0.0, tol.gap_slope);
    } else {
      const mfg::RiccatiGapStudy gs = mfg::riccati_gap_study(P, s.study.Ns);
      add("Riccati gap slope", gs.fit.slope, -1.0, std::abs(gs.fit.slope + 1.0), tol.gap_slope);
    }
  }
  return rows;
}

int cmd_lq_validate(const Scenario& s, std::ostream& out) {
  const std::vector<ValidationRow> rows = lq_validation(s);
  bool pass = true;
  out << std::left << std::setw(28) << "check" << std::setw(16) << "value" << std::setw(16) << "oracle"
      << std::setw(18) << "error" << std::setw(10) << "tolerance"
      << "  verdict\n";
  for (const auto& r : rows) {
    out << std::setw(28) << r.name << std::setw(16) << format_number(r.value) << std::setw(16)
        << format_number(r.oracle) << std::setw(18) << format_number(r.error) << std::setw(10)
        << format_number(r.tolerance) << "  " << (r.pass ? "pass" : "FAIL") << "\n";
    pass = pass && r.pass;
  }
  out << std::right;
  return pass ? kOk : kDomainFailure;
}

int cmd_rate_table(int n, double q, const std::vector<int>& Ns, std::ostream& out) {
  // Validate before printing so a bad q leaves stdout empty.
  if (!Ns.empty()) mfg::rnq(n, q, Ns.front());
  else if (!(q > 2) || n < 1) throw MfgError(ErrorCode::InvalidParams, "rate needs n >= 1 and q > 2");
  out << "N,rnq\n";
  for (int N : Ns) out << N << ',' << std::setprecision(10) << mfg::rnq(n, q, N) << '\n';
  return kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical lab for mean field games with common noise", "mfglab"};
  app.require_subcommand(1);
  std::string scenario_path, out_path, format = "both";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    auto* opt = sub->add_option("--scenario", scenario_path, "Scenario file (JSON)");
    if (needs_scenario) opt->required();
    sub->add_option("--out", out_path, "Output file or directory");
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", format, "Study outputs")->check(CLI::IsMember({"csv", "svg", "both"}));
  };
  auto* monotone = app.add_subcommand("check-monotone", "Run the structural monotonicity checks");
  auto* mkv = app.add_subcommand("solve-mkv", "Solve the mean field equilibrium and serialize it");
  auto* chaos = app.add_subcommand("chaos-study", "Propagation-of-chaos study over the N ladder");
  auto* validate = app.add_subcommand("lq-validate", "Compare solvers with the Riccati oracle");
  auto* rate = app.add_subcommand("rate-table", "Tabulate the empirical-measure rate r_{N,q}");
  for (auto* sub : {monotone, mkv, chaos, validate}) add_common(sub, true);
  add_common(rate, false);
  int rate_n = 0;
  double rate_q = 0.0;
  std::vector<int> rate_Ns;
  rate->add_option("--n", rate_n, "State dimension (default: scenario n, else 1)");
  rate->add_option("--q", rate_q, "Moment order q > 2")->required();
  rate->add_option("--Ns", rate_Ns, "Ladder (default: scenario Ns, else empty)");

  std::vector<std::string> args(argv + 1, argv + argc);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    mfg::set_thread_count(threads);
    Scenario s;
    if (!scenario_path.empty()) s = load_scenario(scenario_path);
    if (seed) s.seed = *seed;
    CommandOptions opt;
    opt.out = out_path;
    opt.format = format == "csv" ? Format::Csv : format == "svg" ? Format::Svg : Format::Both;
    if (*monotone) return cmd_check_monotone(s, opt, out);
    if (*mkv) return cmd_solve_mkv(s, opt, out);
    if (*chaos) return cmd_chaos_study(s, opt, out);
    if (*validate) return cmd_lq_validate(s, out);
    const bool have_scenario = !scenario_path.empty();
    const int n = rate->count("--n") ? rate_n : (have_scenario ? s.model.n : 1);
    const std::vector<int> Ns = rate->count("--Ns") ? rate_Ns : (have_scenario ? s.study.Ns : std::vector<int>{});
    return cmd_rate_table(n, rate_q, Ns, out);
  } catch (const MfgError& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
}

}  // namespace mfglab
