#include "doctest.h"

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "rloss/experiment.hpp"

using namespace rloss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rloss_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_spec(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "spec.ini";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

int run_cmd(const CommandOptions& o, std::string* err_text = nullptr, bool sweep = false) {
  std::ostringstream out, err;
  const int code = sweep ? cmd_sweep(o, out, err) : cmd_run(o, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

const char* kMinimal = "[experiment]\nname = mini\n[env]\nkind = tabular\n[run]\nepisodes = 30\n";

}  // namespace

TEST_CASE("run writes the contracted artifacts") {
  const auto dir = scratch("run");
  CommandOptions o;
  o.spec_path = write_spec(dir, kMinimal).string();
  o.out = (dir / "out").string();
  REQUIRE(run_cmd(o) == kExitOk);
  const fs::path run_dir = dir / "out" / "mini";
  std::ifstream metrics(run_dir / "metrics.csv");
  std::string header;
  std::getline(metrics, header);
  CHECK(header == metrics_header(4));
  for (const char* f : {"summary.json", "buffers.csv", "trajectories.csv", "qtables.csv", "spec.ini", "env.txt"}) {
    CHECK(fs::exists(run_dir / f));
  }
  CHECK_FALSE(fs::exists(run_dir / "planner_trace.csv"));
  const auto first = tree(run_dir);

  std::string err;
  CHECK(run_cmd(o, &err) == kExitValidation);
  CHECK(err.find("--force") != std::string::npos);
  o.force = true;
  o.trace = true;
  REQUIRE(run_cmd(o) == kExitOk);
  auto second = tree(run_dir);
  CHECK(second.count("planner_trace.csv") == 1);
  CHECK(second.count("bisection_trace.csv") == 1);
  second.erase("planner_trace.csv");
  second.erase("bisection_trace.csv");
  CHECK(first == second);
  // No temporary directory is left behind.
  for (const auto& e : fs::directory_iterator(dir / "out")) CHECK(e.path().filename() == "mini");
}

TEST_CASE("validation failures exit with 2") {
  const auto dir = scratch("invalid");
  CommandOptions o;
  o.out = (dir / "out").string();
  o.spec_path = write_spec(dir, "[run]\ndelta = 1.5\n").string();
  std::string err;
  CHECK(run_cmd(o, &err) == kExitValidation);
  CHECK(err.find("run.delta") != std::string::npos);
  CHECK(err.find("line 2") != std::string::npos);
  o.spec_path = (dir / "missing.ini").string();
  CHECK(run_cmd(o) == kExitValidation);
  o.spec_path = write_spec(dir, kMinimal).string();
  CHECK(run_cmd(o, nullptr, true) == kExitValidation);  // sweep without axes
  CHECK_FALSE(fs::exists(dir / "out" / "mini"));
}

TEST_CASE("output root precedence") {
  ExperimentSpec spec;
  CommandOptions o;
  ::unsetenv("RLOSS_OUT");
  CHECK(output_root(o, spec) == fs::path("rloss_out"));
  ::setenv("RLOSS_OUT", "/tmp/from_env", 1);
  CHECK(output_root(o, spec) == fs::path("/tmp/from_env"));
  spec.output = "from_spec";
  CHECK(output_root(o, spec) == fs::path("from_spec"));
  o.out = "from_flag";
  CHECK(output_root(o, spec) == fs::path("from_flag"));
  ::unsetenv("RLOSS_OUT");
}

TEST_CASE("sweeps aggregate per K and are independent of parallelism") {
  const auto dir = scratch("sweep");
  CommandOptions o;
  o.spec_path =
      write_spec(dir, "[experiment]\nname = sw\n[sweep]\nepisodes = 100, 1000\nseeds = 1..5\n").string();
  o.out = (dir / "p1").string();
  REQUIRE(run_cmd(o, nullptr, true) == kExitOk);
  o.out = (dir / "p8").string();
  o.parallel = 8;
  REQUIRE(run_cmd(o, nullptr, true) == kExitOk);
  CHECK(tree(dir / "p1" / "sw") == tree(dir / "p8" / "sw"));

  std::istringstream agg(slurp(dir / "p1" / "sw" / "aggregate.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(agg, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);

  // switch_growth from the child summaries.
  double sw[2] = {0.0, 0.0};
  int ks[2] = {100, 1000};
  for (int i = 0; i < 2; ++i) {
    for (int seed = 1; seed <= 5; ++seed) {
      const auto p = dir / "p1" / "sw" / ("K" + std::to_string(ks[i])) / "practical" / ("seed" + std::to_string(seed));
      sw[i] += nlohmann::json::parse(slurp(p / "summary.json")).at("final_switches").get<double>();
    }
  }
  const std::string growth = lines[2].substr(lines[2].rfind(',') + 1);
  CHECK(std::stod(growth) == doctest::Approx(sw[1] / sw[0]).epsilon(1e-12));
  CHECK(lines[1].rfind("practical,100,5,0,", 0) == 0);
}

TEST_CASE("a failing child still yields an aggregate") {
  const auto dir = scratch("failing");
  // Nine functions over four steps: the data-free first plan costs 4 * 81 = 324,
  // any later plan with two distinct cells at some step costs more than 330.
  CommandOptions o;
  o.spec_path = write_spec(dir,
                           "[experiment]\nname = f\n[env]\nkind = chain\nlength = 3\nhorizon = 4\n"
                           "[class]\nkind = qstar\n[run]\nplanner = B\nwork_cap = 330\n"
                           "[sweep]\nepisodes = 1, 20\n")
                    .string();
  o.out = (dir / "out").string();
  CHECK(run_cmd(o, nullptr, true) == kExitRuntime);
  const auto agg = slurp(dir / "out" / "f" / "aggregate.csv");
  CHECK(agg.find("practical,1,1,0,") != std::string::npos);
  CHECK(agg.find("practical,20,0,1,") != std::string::npos);
}

TEST_CASE("diag checks") {
  const auto dir = scratch("diag");
  {
    std::ofstream cls(dir / "three.txt");
    const double v[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    for (int i = 0; i < 3; ++i) {
      for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) cls << i << ' ' << s << ' ' << a << ' ' << (s == 0 ? v[i][a] : 0.0) << '\n';
      }
    }
  }
  CommandOptions o;
  o.spec_path = write_spec(dir,
                           "[experiment]\nname = d\n[env]\nkind = tabular\nstates = 2\nactions = 2\nhorizon = 2\n"
                           "[class]\nkind = finite\npath = three.txt\n"
                           "[run]\nepisodes = 200\npreset = theory\nsampler_beta = 1\n")
                    .string();
  o.out = (dir / "out").string();
  REQUIRE(run_cmd(o) == kExitOk);
  const auto run_dir = (dir / "out" / "d").string();

  auto diag = [&](const std::string& check, std::string* text) {
    std::ostringstream out, err;
    DiagOptions d;
    d.dir = run_dir;
    d.check = check;
    const int code = cmd_diag(d, out, err);
    *text = out.str() + err.str();
    return code;
  };
  std::string text;
  CHECK(diag("distortion", &text) == kExitOk);
  CHECK(text.rfind("PASS distortion violation_rate=", 0) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "distortion.csv"));

  // Two points separate the three functions one at a time: dimension 2.
  CHECK(diag("eluder", &text) == kExitOk);
  CHECK(text.rfind("eluder_dimension=2 ", 0) == 0);

  CHECK(diag("optimism", &text) != kExitValidation);
  CHECK(text.find("optimism fraction=") != std::string::npos);
  CHECK(diag("cover", &text) == kExitOk);

  CHECK(diag("nonsense", &text) == kExitValidation);
  for (const auto& name : diag_checks()) CHECK(text.find(name) != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("binary");
  const std::string cli = RLOSS_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const auto spec = write_spec(dir, kMinimal);
  CHECK(status(cli + " run --spec " + spec.string() + " --out " + (dir / "o").string()) == 0);
  CHECK(status(cli + " run --spec " + spec.string() + " --out " + (dir / "o").string()) == 2);
  CHECK(status(cli + " run --spec " + spec.string() + " --out " + (dir / "o").string() + " --force --seed 3") == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "o" / "mini" / "summary.json")).at("seed").get<int>() == 3);
  CHECK(status(cli + " run") == 2);
  CHECK(status(cli + " frobnicate") == 2);
  CHECK(status(cli + " diag nonsense --dir " + (dir / "o" / "mini").string()) == 2);
  const auto bad = write_spec(dir, "[run]\ndelta = 1.5\n");
  CHECK(status(cli + " run --spec " + bad.string() + " --out " + (dir / "o").string()) == 2);
}
