#include "scenario.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mfglab {

using nlohmann::json;
using mfg::ErrorCode;
using mfg::MfgError;

namespace {

[[noreturn]] void schema(const std::string& what) { throw MfgError(ErrorCode::SchemaError, what); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& block) {
  if (!obj.is_object()) schema(block + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) schema("unknown key '" + key + "' in " + block);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read_opt(const json& obj, const char* key, std::optional<T>& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Eigen::MatrixXd to_eigen(const Matrix& m, int rows, int cols, const char* name) {
  if (static_cast<int>(m.size()) != rows) schema(std::string(name) + " has the wrong number of rows");
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(m[r].size()) != cols) schema(std::string(name) + " has the wrong number of columns");
    for (int c = 0; c < cols; ++c) out(r, c) = m[r][c];
  }
  return out;
}

void validate(const Scenario& s) {
  const auto& m = s.model;
  if (m.family != "lq" && m.family != "constant_vol_quadratic") schema("unknown model family '" + m.family + "'");
  if (m.n < 1 || m.n > mfg::kMaxDim || m.d < 1 || m.d > mfg::kMaxDim) schema("model dimensions out of range");
  to_eigen(m.Sigma, m.n, m.d, "Sigma");
  to_eigen(m.Sigma0, m.n, m.d, "Sigma0");
  to_eigen(m.Lambda0, m.n, m.n, "Lambda0");
  if (static_cast<int>(m.mu0.size()) != m.n) schema("mu0 must have n entries");
  const auto& g = s.grid;
  if (g.T.has_value() == g.T_max.has_value()) schema("grid needs exactly one of T and T_max");
  if (!(g.horizon() > 0)) schema("grid horizon must be positive");
  if (g.T && g.r != 0.0) schema("a discount needs T_max instead of T");
  if (g.T_max && !(g.r > 0)) schema("T_max needs a positive discount r");
  if (g.steps < 1) schema("grid steps must be positive");
  if (s.ensemble.paths < 1 || s.ensemble.particles < 1) schema("ensemble sizes must be positive");
  const auto& st = s.study;
  if (st.trials < 1 || st.mfe_particles < 1) schema("study sizes must be positive");
  for (std::size_t a = 0; a < st.Ns.size(); ++a) {
    if (st.Ns[a] < 1 || (a > 0 && st.Ns[a] <= st.Ns[a - 1])) schema("study Ns must be strictly increasing");
  }
  for (double T : st.T_max_ladder)
    if (!(T > 0)) schema("T_max_ladder entries must be positive");
  if (s.solver.method != "continuation" && s.solver.method != "picard") schema("solver method must be continuation or picard");
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  try {
    const json root = json::parse(text);
    check_keys(root, {"model", "grid", "ensemble", "study", "solver", "seed"}, "scenario");
    if (root.contains("model")) {
      const json& m = root.at("model");
      check_keys(m, {"family", "n", "d", "Sigma", "Sigma0", "q", "f_cost", "rho", "g_cost", "c_l", "mu0", "Lambda0"},
                 "model");
      auto& o = s.model;
      read(m, "family", o.family);
      read(m, "n", o.n);
      read(m, "d", o.d);
      read(m, "Sigma", o.Sigma);
      read(m, "Sigma0", o.Sigma0);
      read(m, "q", o.q);
      read(m, "f_cost", o.f_cost);
      read(m, "rho", o.rho);
      read(m, "g_cost", o.g_cost);
      read(m, "c_l", o.c_l);
      read(m, "mu0", o.mu0);
      read(m, "Lambda0", o.Lambda0);
    }
    if (root.contains("grid")) {
      const json& g = root.at("grid");
      check_keys(g, {"T", "T_max", "r", "steps"}, "grid");
      read_opt(g, "T", s.grid.T);
      read_opt(g, "T_max", s.grid.T_max);
      read(g, "r", s.grid.r);
      read(g, "steps", s.grid.steps);
    }
    if (!s.grid.T && !s.grid.T_max) s.grid.T = 1.0;
    if (root.contains("ensemble")) {
      const json& e = root.at("ensemble");
      check_keys(e, {"paths", "particles"}, "ensemble");
      read(e, "paths", s.ensemble.paths);
      read(e, "particles", s.ensemble.particles);
    }
    if (root.contains("study")) {
      const json& st = root.at("study");
      check_keys(st, {"Ns", "trials", "mfe_particles", "T_max_ladder", "metrics", "tolerances"}, "study");
      read(st, "Ns", s.study.Ns);
      read(st, "trials", s.study.trials);
      read(st, "mfe_particles", s.study.mfe_particles);
      read(st, "T_max_ladder", s.study.T_max_ladder);
      if (st.contains("metrics")) {
        const json& mt = st.at("metrics");
        check_keys(mt, {"error_terms", "chaos_w2", "w2_node", "w2_k"}, "study.metrics");
        read(mt, "error_terms", s.study.error_terms);
        read(mt, "chaos_w2", s.study.chaos_w2);
        read(mt, "w2_node", s.study.w2_node);
        read(mt, "w2_k", s.study.w2_k);
      }
      if (st.contains("tolerances")) {
        const json& t = st.at("tolerances");
        check_keys(t, {"y0", "cost", "nplayer", "gap_slope"}, "study.tolerances");
        read(t, "y0", s.study.tolerances.y0);
        read(t, "cost", s.study.tolerances.cost);
        read(t, "nplayer", s.study.tolerances.nplayer);
        read(t, "gap_slope", s.study.tolerances.gap_slope);
      }
    }
    if (root.contains("solver")) {
      const json& v = root.at("solver");
      check_keys(v,
                 {"method", "damping", "tol", "max_iters", "eta", "eta_floor", "blowup", "direct_first", "flow_tol",
                  "max_outer"},
                 "solver");
      auto& o = s.solver;
      read(v, "method", o.method);
      read(v, "damping", o.damping);
      read(v, "tol", o.tol);
      read(v, "max_iters", o.max_iters);
      read(v, "eta", o.eta);
      read(v, "eta_floor", o.eta_floor);
      read(v, "blowup", o.blowup);
      read(v, "direct_first", o.direct_first);
      read(v, "flow_tol", o.flow_tol);
      read(v, "max_outer", o.max_outer);
    }
    read(root, "seed", s.seed);
  } catch (const json::exception& e) {
    schema(e.what());
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) schema("cannot read scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& s) {
  json root;
  const auto& m = s.model;
  root["model"] = {{"family", m.family}, {"n", m.n},           {"d", m.d},           {"Sigma", m.Sigma},
                   {"Sigma0", m.Sigma0}, {"q", m.q},           {"f_cost", m.f_cost}, {"rho", m.rho},
                   {"g_cost", m.g_cost}, {"c_l", m.c_l},       {"mu0", m.mu0},       {"Lambda0", m.Lambda0}};
  json grid = {{"steps", s.grid.steps}};
  if (s.grid.T) grid["T"] = *s.grid.T;
  if (s.grid.T_max) {
    grid["T_max"] = *s.grid.T_max;
    grid["r"] = s.grid.r;
  }
  root["grid"] = grid;
  root["ensemble"] = {{"paths", s.ensemble.paths}, {"particles", s.ensemble.particles}};
  const auto& st = s.study;
  root["study"] = {{"Ns", st.Ns},
                   {"trials", st.trials},
                   {"mfe_particles", st.mfe_particles},
                   {"T_max_ladder", st.T_max_ladder},
                   {"metrics",
                    {{"error_terms", st.error_terms}, {"chaos_w2", st.chaos_w2}, {"w2_node", st.w2_node},
                     {"w2_k", st.w2_k}}},
                   {"tolerances",
                    {{"y0", st.tolerances.y0},
                     {"cost", st.tolerances.cost},
                     {"nplayer", st.tolerances.nplayer},
                     {"gap_slope", st.tolerances.gap_slope}}}};
  const auto& v = s.solver;
  root["solver"] = {{"method", v.method},       {"damping", v.damping},     {"tol", v.tol},
                    {"max_iters", v.max_iters}, {"eta", v.eta},             {"eta_floor", v.eta_floor},
                    {"blowup", v.blowup},       {"direct_first", v.direct_first}, {"flow_tol", v.flow_tol},
                    {"max_outer", v.max_outer}};
  root["seed"] = s.seed;
  return root.dump(2) + "\n";
}

mfg::LQParams lq_params(const Scenario& s) {
  const auto& m = s.model;
  mfg::LQParams p;
  p.n = m.n;
  p.d = m.d;
  p.Sigma = to_eigen(m.Sigma, m.n, m.d, "Sigma");
  p.Sigma0 = to_eigen(m.Sigma0, m.n, m.d, "Sigma0");
  p.q = m.q;
  p.f_cost = m.f_cost;
  p.rho = m.rho;
  p.g_cost = m.g_cost;
  p.c_l = m.c_l;
  p.T = s.grid.horizon();
  p.r = s.grid.r;
  p.mu0 = Eigen::Map<const Eigen::VectorXd>(m.mu0.data(), m.n);
  p.Lambda0 = to_eigen(m.Lambda0, m.n, m.n, "Lambda0");
  return p;
}

mfg::GameSpec game_spec(const Scenario& s) {
  const mfg::LQParams p = lq_params(s);
  return s.model.family == "lq" ? mfg::make_lq(p) : mfg::make_constant_vol_quadratic(p);
}

mfg::TimeGrid time_grid(const Scenario& s) { return {s.grid.horizon(), s.grid.steps}; }

mfg::SolverConfig solver_config(const Scenario& s) {
  mfg::SolverConfig c;
  const auto& v = s.solver;
  c.picard_damping = v.damping;
  c.picard_tol = v.tol;
  c.picard_max_iters = v.max_iters;
  c.eta = v.eta;
  c.eta_floor = v.eta_floor;
  c.blowup_bound = v.blowup;
  c.direct_first = v.direct_first;
  c.method = v.method == "picard" ? mfg::SolverMethod::Picard : mfg::SolverMethod::Continuation;
  c.seed = s.seed;
  return c;
}

mfg::FlowConfig flow_config(const Scenario& s) { return {s.solver.flow_tol, s.solver.max_outer}; }

mfg::ChaosOptions chaos_options(const Scenario& s) {
  mfg::ChaosOptions o;
  o.mfe_particles = s.study.mfe_particles;
  o.w2_node = s.study.w2_node;
  o.w2_k = s.study.w2_k;
  o.error_terms = s.study.error_terms;
  o.chaos_w2 = s.study.chaos_w2;
  o.flow = flow_config(s);
  return o;
}

}  // namespace mfglab
