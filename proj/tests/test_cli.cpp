#include "commands.hpp"
#include "doctest.h"
#include "mfg/mkv.hpp"
#include "mfg/parallel.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfglab;
namespace fs = std::filesystem;

namespace {

std::string scenario(const std::string& name) { return std::string(MFG_SCENARIO_DIR) + "/" + name; }

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mfglab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mfglab_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("scenario files round trip through the serializer") {
    for (const char* name : {"default_lq.json", "long_horizon.json", "discounted.json", "interaction_free.json",
                             "failing_tradeoff.json", "smoke.json"}) {
      CAPTURE(name);
      const Scenario s = load_scenario(scenario(name));
      CHECK(parse_scenario(dump_scenario(s)) == s);
    }
    CHECK(parse_scenario("{}") == Scenario{.grid = {.T = 1.0}});
  }

  TEST_CASE("schema violations") {
    const auto rejects = [](const std::string& text) {
      try {
        parse_scenario(text);
      } catch (const mfg::MfgError& e) {
        return e.code() == mfg::ErrorCode::SchemaError;
      }
      return false;
    };
    CHECK(rejects(R"({"colour": 1})"));
    CHECK(rejects(R"({"grid": {"T": 1, "dt": 0.1}})"));
    CHECK(rejects(R"({"grid": {"T": 1, "T_max": 2, "r": 1}})"));
    CHECK(rejects(R"({"grid": {"T": 1, "r": 0.5}})"));
    CHECK(rejects(R"({"grid": {"T_max": 4}})"));
    CHECK(rejects(R"({"model": {"family": "quartic"}})"));
    CHECK(rejects(R"({"model": {"n": 2}})"));
    CHECK(rejects(R"({"study": {"Ns": [8, 4]}})"));
    CHECK(rejects(R"({"study": {"metrics": {"foo": true}}})"));
    CHECK(rejects(R"({"solver": {"method": "newton"}})"));
    CHECK(rejects(R"({"ensemble": {"paths": "many"}})"));
    CHECK(rejects("{"));
  }

  TEST_CASE("exit codes for usage errors") {
    const fs::path dir = scratch("usage");
    CHECK(cli({}).code == kUsageError);
    CHECK(cli({"frobnicate"}).code == kUsageError);
    CHECK(cli({"check-monotone"}).code == kUsageError);
    CHECK(cli({"check-monotone", "--scenario", (dir / "missing.json").string()}).code == kUsageError);
    const std::string bad = write_file(dir / "bad.json", R"({"model": {"family": "lq", "colour": 3}})");
    const Run r = cli({"check-monotone", "--scenario", bad});
    CHECK(r.code == kUsageError);
    CHECK(r.err.find("colour") != std::string::npos);
    CHECK(cli({"check-monotone", "--scenario", scenario("smoke.json"), "--threads", "0"}).code == kUsageError);
    CHECK(cli({"chaos-study", "--scenario", scenario("smoke.json"), "--format", "png"}).code == kUsageError);
  }

  TEST_CASE("error codes map onto exit codes") {
    using mfg::ErrorCode;
    CHECK(exit_code_for(ErrorCode::ConditionFailed) == kDomainFailure);
    CHECK(exit_code_for(ErrorCode::SchemaError) == kUsageError);
    CHECK(exit_code_for(ErrorCode::InvalidParams) == kUsageError);
    CHECK(exit_code_for(ErrorCode::NoConvergence) == kSolverFailure);
    CHECK(exit_code_for(ErrorCode::HomotopyStall) == kSolverFailure);
  }

  TEST_CASE("rate table") {
    const Run r = cli({"rate-table", "--n", "3", "--q", "3", "--Ns", "100"});
    CHECK(r.code == kOk);
    CHECK(r.out.rfind("N,rnq\n100,0.31544346", 0) == 0);
    CHECK(cli({"rate-table", "--n", "3", "--q", "3"}).out == "N,rnq\n");
    const Run four = cli({"rate-table", "--n", "2", "--q", "3", "--Ns", "1", "4", "16"});
    CHECK(count_lines(four.out) == 4);
    CHECK(cli({"rate-table", "--n", "3", "--q", "2", "--Ns", "10"}).code == kUsageError);
    CHECK(cli({"rate-table", "--n", "3"}).code == kUsageError);
  }

  TEST_CASE("check-monotone verdicts") {
    const Run ok = cli({"check-monotone", "--scenario", scenario("default_lq.json")});
    CHECK(ok.code == kOk);
    CHECK(ok.out.find("verdict: pass") != std::string::npos);
    const fs::path dir = scratch("monotone");
    const Run bad = cli({"check-monotone", "--scenario", scenario("failing_tradeoff.json"), "--out",
                         (dir / "report.txt").string()});
    CHECK(bad.code == kDomainFailure);
    CHECK(bad.out.find("estimated_constant: -3") != std::string::npos);
    CHECK(slurp(dir / "report.txt") == bad.out);
  }

  TEST_CASE("solve-mkv with zero costs") {
    const fs::path dir = scratch("zero");
    const std::string path = write_file(dir / "zero.json", R"({
      "model": {"q": 0.0, "f_cost": 0.0, "g_cost": 0.0},
      "grid": {"T": 1.0, "steps": 10},
      "ensemble": {"paths": 4, "particles": 16}
    })");
    const Run r = cli({"solve-mkv", "--scenario", path, "--out", (dir / "mfe.bin").string()});
    CHECK(r.code == kOk);
    CHECK(r.out.find("Y0 mean") != std::string::npos);
    std::ifstream in(dir / "mfe.bin", std::ios::binary);
    const mfg::MfeData d = mfg::read_mfe(in);
    CHECK(d.ensemble.paths() == 4);
    for (double a : d.control) CHECK(a == 0.0);
  }

  TEST_CASE("solve-mkv refuses a discounted game violating the discount condition") {
    const fs::path dir = scratch("discount");
    const std::string path = write_file(dir / "disc.json", R"({
      "model": {"family": "constant_vol_quadratic", "q": 0.0, "f_cost": 4.0, "rho": 3.0, "g_cost": 0.0},
      "grid": {"T_max": 4.0, "r": 1.0, "steps": 20}
    })");
    const Run r = cli({"solve-mkv", "--scenario", path});
    CHECK(r.code == kDomainFailure);
    CHECK(r.out.find("InfiniteHorizon") != std::string::npos);
  }

  TEST_CASE("chaos-study outputs are deterministic across thread counts") {
    const fs::path a = scratch("chaos_a"), b = scratch("chaos_b");
    CHECK(cli({"chaos-study", "--scenario", scenario("smoke.json"), "--out", a.string(), "--threads", "1"}).code == kOk);
    CHECK(cli({"chaos-study", "--scenario", scenario("smoke.json"), "--out", b.string(), "--threads", "8"}).code == kOk);
    mfg::set_thread_count(1);
    const std::string rows = slurp(a / "chaos_trials.csv");
    CHECK(count_lines(rows) == 1 + 3 * 8);
    CHECK(count_lines(slurp(a / "chaos_summary.csv")) == 1 + 3);
    CHECK(rows == slurp(b / "chaos_trials.csv"));
    CHECK(slurp(a / "chaos_summary.csv") == slurp(b / "chaos_summary.csv"));
    CHECK(slurp(a / "chaos_rate.svg").rfind("<svg", 0) == 0);
  }

  TEST_CASE("chaos-study csv format skips the plot") {
    const fs::path dir = scratch("chaos_csv");
    CHECK(cli({"chaos-study", "--scenario", scenario("smoke.json"), "--out", dir.string(), "--format", "csv",
               "--seed", "11"})
              .code == kOk);
    CHECK(fs::exists(dir / "chaos_trials.csv"));
    CHECK_FALSE(fs::exists(dir / "chaos_rate.svg"));
  }

  TEST_CASE("lq-validate") {
    const Run ok = cli({"lq-validate", "--scenario", scenario("smoke.json")});
    CHECK(ok.code == kOk);
    CHECK(ok.out.find("Riccati gap") != std::string::npos);
    const fs::path dir = scratch("coarse");
    const std::string coarse = write_file(dir / "coarse.json", R"({
      "grid": {"T": 1.0, "steps": 10},
      "ensemble": {"paths": 16, "particles": 64},
      "study": {"Ns": [4, 8], "trials": 8}
    })");
    CHECK(cli({"lq-validate", "--scenario", coarse}).code == kDomainFailure);
  }
}
