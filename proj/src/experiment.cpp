#include "rloss/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "rloss/diagnostics.hpp"
#include "rloss/errors.hpp"
#include "rloss/subsampler.hpp"

namespace fs = std::filesystem;

namespace rloss {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

fs::path resolve(const std::string& p, const fs::path& base) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

EpisodicMdp build_env(const EnvSpec& spec, const fs::path& base) {
  if (spec.kind == "tabular") return make_tabular_random(spec.seed, spec.states, spec.actions, spec.horizon);
  if (spec.kind == "linear") return make_linear_mdp(spec.seed, spec.dim, spec.states, spec.actions, spec.horizon);
  if (spec.kind == "chain") return make_chain(spec.horizon, spec.length);
  if (spec.kind == "file") return parse_text(read_file(resolve(spec.path, base)));
  throw InvalidInput("env.kind: unknown kind '" + spec.kind + "'");
}

std::unique_ptr<FiniteClass> make_qstar_class(const EpisodicMdp& env, int distractors,
                                              std::uint64_t seed) {
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  const ValueTable star = exact_optimal_values(env);
  std::vector<std::vector<double>> tables;
  for (int h = 0; h < H; ++h) {
    std::vector<double> t(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) t[static_cast<std::size_t>(s) * A + a] = star.q(h, s, a);
    }
    tables.push_back(std::move(t));
  }
  tables.emplace_back(static_cast<std::size_t>(S) * A, 0.0);
  Rng rng = make_rng(seed, 404);
  for (int i = 0; i < distractors; ++i) {
    std::vector<double> t(static_cast<std::size_t>(S) * A);
    for (auto& v : t) v = 2.0 * uniform01(rng);
    tables.push_back(std::move(t));
  }
  return std::make_unique<FiniteClass>(std::move(tables), S, A, H);
}

std::unique_ptr<FunctionClass> build_class(const ClassSpec& spec, const EpisodicMdp& env,
                                           const fs::path& base) {
  const int S = env.num_states();
  const int A = env.num_actions();
  const int H = env.horizon();
  if (spec.kind == "onehot") return make_onehot_class(S, A, H, spec.ball, spec.ridge);
  if (spec.kind == "linear") {
    if (!env.features()) throw InvalidInput("class.kind: the environment carries no features");
    return std::make_unique<LinearClass>(*env.features(), S, A, H, spec.ball, spec.ridge);
  }
  if (spec.kind == "finite") return parse_finite_class(read_file(resolve(spec.path, base)), S, A, H);
  if (spec.kind == "qstar") return make_qstar_class(env, spec.distractors, spec.seed);
  throw InvalidInput("class.kind: unknown kind '" + spec.kind + "'");
}

RewardTable terminal_reward(const EpisodicMdp& env) {
  if (!env.goal_state()) throw InvalidInput("terminal reward needs an environment with a goal state");
  RewardTable r(env.horizon(), env.num_states(), env.num_actions());
  for (int a = 0; a < env.num_actions(); ++a) r.at(env.horizon() - 1, *env.goal_state(), a) = 1.0;
  return r;
}

std::vector<RewardTable> build_rewards(const std::vector<std::string>& names, const EpisodicMdp& env) {
  std::vector<RewardTable> out;
  for (const auto& n : names) {
    if (n == "terminal") out.push_back(terminal_reward(env));
    else if (n == "zero") out.emplace_back(env.horizon(), env.num_states(), env.num_actions());
    else if (n == "env") out.push_back(env.rewards());
    else throw InvalidInput("reward_free.rewards: unknown reward '" + n + "'");
  }
  return out;
}

fs::path output_root(const CommandOptions& opts, const ExperimentSpec& spec) {
  if (!opts.out.empty()) return opts.out;
  if (!spec.output.empty()) return spec.output;
  if (const char* env = std::getenv("RLOSS_OUT"); env && *env) return env;
  return "rloss_out";
}

namespace {

struct RunOutcome {
  std::string path;
  int episodes = 0;
  std::string preset;
  bool ok = false;
  std::string error;
  double final_regret = 0.0;
  double switches = 0.0;
  double big = 0.0;
  double small = 0.0;
};

struct Instance {
  const EpisodicMdp* env;
  const FunctionClass* cls;
  std::vector<RewardTable> rewards;
};

std::string reward_free_csv(const std::vector<std::string>& names, const RewardFreeResult& res) {
  std::string out = "reward,optimal_value,policy_value,suboptimality\n";
  char buf[128];
  for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
    const auto& o = res.outcomes[i];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", o.optimal_value, o.policy_value, o.suboptimality);
    out += names[i] + buf;
  }
  return out;
}

// Bisection iterates for the first-step bonus at s1 against the final buffer.
std::string bisection_trace_csv(const FunctionClass& cls, const SubDataset& buffer, double beta, int s1) {
  std::string out = "action,iteration,w,z,norm_sq\n";
  const auto* linear = dynamic_cast<const LinearClass*>(&cls);
  if (!linear || !(beta > 0.0)) return out;
  const Eigen::MatrixXd gram = linear->gram(buffer.as_weighted_set());
  char buf[160];
  for (int a = 0; a < cls.num_actions(); ++a) {
    std::vector<BisectionTrace> trace;
    constrained_max_bisect(*linear, gram, cls.point(s1, a), beta, 0.0, &trace);
    for (const auto& t : trace) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", a, t.iteration, t.w, t.z, t.norm_sq);
      out += buf;
    }
  }
  return out;
}

RunOutcome execute_run(const ExperimentSpec& spec, const ExpandedRun& er, const Instance& inst,
                       const fs::path& dir, bool trace) {
  RunOutcome oc;
  oc.path = er.path;
  oc.episodes = er.run.episodes;
  oc.preset = preset_name(er.run.preset);
  fs::create_directories(dir);
  ExperimentSpec local = spec;
  local.run = er.run;
  local.sweep = {};
  write_file(dir / "spec.ini", serialize_spec(local));
  write_file(dir / "env.txt", dump_text(*inst.env));
  if (const auto* finite = dynamic_cast<const FiniteClass*>(inst.cls)) {
    write_file(dir / "class.txt", dump_finite_class(*finite));
  }
  try {
    std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
    RunResult result;
    if (er.run.planner == PlannerKind::RewardFree) {
      auto rf = reward_free_run(*inst.env, *inst.cls, er.run, inst.rewards, &metrics);
      write_file(dir / "reward_free.csv", reward_free_csv(spec.rewards, rf));
      result = std::move(rf.exploration);
    } else {
      result = rloss_run(*inst.env, *inst.cls, er.run, &metrics);
    }
    write_file(dir / "summary.json", summary_json(result, er.run));
    {
      std::ofstream out(dir / "buffers.csv", std::ios::binary);
      write_buffer_csv(out, result.buffers);
    }
    {
      std::ofstream out(dir / "trajectories.csv", std::ios::binary);
      write_trajectories_csv(out, result.trajectories);
    }
    {
      std::ofstream out(dir / "qtables.csv", std::ios::binary);
      write_qtables_csv(out, result.passes);
    }
    if (trace) {
      std::ofstream out(dir / "planner_trace.csv", std::ios::binary);
      write_planner_trace(out, result.planner_trace);
      write_file(dir / "bisection_trace.csv",
                 bisection_trace_csv(*inst.cls, result.buffers.front(), result.beta, inst.env->initial_state()));
    }
    oc.ok = true;
    oc.final_regret = result.records.empty() ? 0.0 : result.records.back().regret_cum;
    oc.switches = result.n_switch;
    oc.big = static_cast<double>(er.run.planner == PlannerKind::B ? result.counts.nested : result.counts.big);
    oc.small = static_cast<double>(result.counts.small);
  } catch (const std::exception& e) {
    oc.error = e.what();
  }
  return oc;
}

std::string aggregate_csv(const std::vector<RunOutcome>& outcomes) {
  struct Group {
    std::string preset;
    int episodes;
    std::vector<const RunOutcome*> runs;
    int failed = 0;
  };
  std::vector<Group> groups;
  for (const auto& oc : outcomes) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.preset == oc.preset && g.episodes == oc.episodes;
    });
    if (it == groups.end()) it = groups.insert(groups.end(), Group{oc.preset, oc.episodes, {}});
    if (oc.ok) it->runs.push_back(&oc);
    else ++it->failed;
  }
  auto stats = [](const std::vector<const RunOutcome*>& runs, double RunOutcome::*field) {
    double mean = 0.0;
    for (auto* r : runs) mean += r->*field;
    if (runs.empty()) return std::make_pair(0.0, 0.0);
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (auto* r : runs) var += (r->*field - mean) * (r->*field - mean);
    const double sd = runs.size() > 1 ? std::sqrt(var / static_cast<double>(runs.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  std::string out =
      "preset,K,runs,failed,regret_mean,regret_std,switches_mean,switches_std,big_calls_mean,"
      "big_calls_std,small_calls_mean,small_calls_std,switch_growth\n";
  std::map<std::string, double> prev_switches;
  char buf[512];
  for (const auto& g : groups) {
    const auto regret = stats(g.runs, &RunOutcome::final_regret);
    const auto sw = stats(g.runs, &RunOutcome::switches);
    const auto big = stats(g.runs, &RunOutcome::big);
    const auto small = stats(g.runs, &RunOutcome::small);
    std::string growth;
    if (auto it = prev_switches.find(g.preset); it != prev_switches.end() && it->second > 0.0) {
      std::snprintf(buf, sizeof buf, "%.17g", sw.first / it->second);
      growth = buf;
    }
    prev_switches[g.preset] = sw.first;
    std::snprintf(buf, sizeof buf, "%s,%d,%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,",
                  g.preset.c_str(), g.episodes, g.runs.size(), g.failed, regret.first, regret.second,
                  sw.first, sw.second, big.first, big.second, small.first, small.second);
    out += buf + growth + "\n";
  }
  return out;
}

int run_experiment(const CommandOptions& opts, bool sweep, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec;
  fs::path base;
  try {
    if (opts.spec_path.empty()) throw InvalidInput("--spec is required");
    base = fs::path(opts.spec_path).parent_path();
    spec = parse_spec(read_file(opts.spec_path));
    if (opts.seed) {
      spec.run.seed = *opts.seed;
      spec.sweep.seeds.clear();
    }
    if (sweep && spec.sweep.empty()) throw SpecError(0, "sweep", "sweep axes must be nonempty");
    if (opts.parallel < 1) throw InvalidInput("--parallel must be >= 1");
  } catch (const InvalidInput& e) {
    err << opts.spec_path << ": " << e.what() << "\n";
    return kExitValidation;
  }

  std::unique_ptr<EpisodicMdp> env;
  std::unique_ptr<FunctionClass> cls;
  Instance inst{};
  try {
    env = std::make_unique<EpisodicMdp>(build_env(spec.env, base));
    cls = build_class(spec.cls, *env, base);
    inst = {env.get(), cls.get(), {}};
    if (spec.run.planner == PlannerKind::RewardFree) inst.rewards = build_rewards(spec.rewards, *env);
  } catch (const InvalidInput& e) {
    err << opts.spec_path << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << opts.spec_path << ": " << e.what() << "\n";
    return kExitRuntime;
  }

  const fs::path root = output_root(opts, spec);
  const fs::path final_dir = root / spec.name;
  const fs::path tmp = root / ("." + spec.name + ".tmp");
  if (fs::exists(final_dir) && !opts.force) {
    err << final_dir.string() << " exists; pass --force to overwrite\n";
    return kExitValidation;
  }
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);

  const auto runs = expand_sweep(spec);
  std::vector<RunOutcome> outcomes(runs.size());
  const int width = sweep ? std::min<int>(opts.parallel, static_cast<int>(runs.size())) : 1;
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      outcomes[i] = execute_run(spec, runs[i], inst, tmp / runs[i].path, opts.trace);
      std::lock_guard lock(log_mutex);
      const auto label = runs[i].path.empty() ? spec.name : runs[i].path;
      if (outcomes[i].ok) {
        out << "done " << label << " regret=" << outcomes[i].final_regret << " switches=" << outcomes[i].switches << "\n";
      } else {
        err << "failed " << label << ": " << outcomes[i].error << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < width; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  try {
    write_file(tmp / "experiment.ini", serialize_spec(spec));
    if (sweep) write_file(tmp / "aggregate.csv", aggregate_csv(outcomes));
    if (fs::exists(final_dir)) fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
  } catch (const std::exception& e) {
    err << "cannot finalize outputs: " << e.what() << "\n";
    return kExitRuntime;
  }
  for (const auto& oc : outcomes) {
    if (!oc.ok) code = kExitRuntime;
  }
  out << "outputs in " << final_dir.string() << "\n";
  return code;
}

}  // namespace

int cmd_run(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return run_experiment(opts, false, out, err);
}

int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return run_experiment(opts, true, out, err);
}

// ------------------------------------------------------------- diag

std::vector<std::string> diag_checks() { return {"distortion", "optimism", "eluder", "cover"}; }

int cmd_diag(const DiagOptions& opts, std::ostream& out, std::ostream& err) {
  const auto checks = diag_checks();
  if (std::find(checks.begin(), checks.end(), opts.check) == checks.end()) {
    err << "unknown check '" << opts.check << "'; valid checks:";
    for (const auto& c : checks) err << " " << c;
    err << "\n";
    return kExitValidation;
  }
  const fs::path dir(opts.dir);
  try {
    const ExperimentSpec spec = parse_spec(read_file(dir / "spec.ini"));
    const EpisodicMdp env = parse_text(read_file(dir / "env.txt"));
    std::unique_ptr<FunctionClass> cls;
    if (fs::exists(dir / "class.txt")) {
      cls = parse_finite_class(read_file(dir / "class.txt"), env.num_states(), env.num_actions(), env.horizon());
    } else {
      cls = build_class(spec.cls, env, dir);
    }
    const int H = env.horizon();
    const double t = static_cast<double>(spec.run.episodes) * H;
    const double delta = spec.run.delta;

    if (opts.check == "distortion") {
      std::ifstream tin(dir / "trajectories.csv");
      std::ifstream bin(dir / "buffers.csv");
      if (!tin || !bin) throw InvalidInput("missing trajectories.csv or buffers.csv in " + dir.string());
      const auto trajectories = read_trajectories_csv(tin, H);
      const auto buffers = read_buffer_csv(bin, H);
      const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
      const double beta = summary.at("sampler").at("beta").get<double>();
      const auto rep = distortion_audit(*cls, trajectories, buffers, beta, t, opts.pairs, opts.seed);
      std::ostringstream csv;
      csv << "k,h,pair,full_norm,sub_norm,large,pass\n";
      for (const auto& r : rep.failures) {
        csv << r.k << ',' << r.h << ',' << r.pair << ',' << r.full_norm << ',' << r.sub_norm << ','
            << int(r.large) << ',' << int(r.pass) << '\n';
      }
      write_file(dir / "distortion.csv", csv.str());
      const bool pass = rep.violation_rate() <= delta;
      out << (pass ? "PASS" : "FAIL") << " distortion violation_rate=" << rep.violation_rate()
          << " checks=" << rep.checks << " large_checks=" << rep.large_checks
          << " worst_ratio=" << rep.worst_ratio << "\n";
      return pass ? kExitOk : kExitCheckFailed;
    }
    if (opts.check == "optimism") {
      if (spec.run.planner == PlannerKind::RewardFree) throw InvalidInput("optimism needs a reward-driven run");
      std::ifstream qin(dir / "qtables.csv");
      if (!qin) throw InvalidInput("missing qtables.csv in " + dir.string());
      const auto passes = read_qtables_csv(qin, H, env.num_states(), env.num_actions());
      const auto rep = optimism_audit(passes, env);
      const double score = spec.run.planner == PlannerKind::B ? rep.value_fraction : rep.fraction;
      const bool pass = score >= 1.0 - delta;
      std::ostringstream csv;
      csv << "fraction,episode_fraction,value_fraction,episodes\n"
          << rep.fraction << ',' << rep.episode_fraction << ',' << rep.value_fraction << ',' << rep.episodes << '\n';
      write_file(dir / "optimism.csv", csv.str());
      out << (pass ? "PASS" : "FAIL") << " optimism fraction=" << rep.fraction
          << " episode_fraction=" << rep.episode_fraction << " value_fraction=" << rep.value_fraction << "\n";
      return pass ? kExitOk : kExitCheckFailed;
    }
    if (opts.check == "eluder") {
      const auto* finite = dynamic_cast<const FiniteClass*>(cls.get());
      if (!finite) throw UnsupportedError("eluder check needs a finite class");
      std::vector<StateAction> pool;
      for (int s = 0; s < env.num_states(); ++s) {
        for (int a = 0; a < env.num_actions(); ++a) pool.push_back(cls->point(s, a));
      }
      const double eps = opts.eps > 0.0 ? opts.eps : 1.0 / t;
      const int dim = eluder_dimension_bruteforce(*finite, pool, eps);
      write_file(dir / "eluder.csv", "eps,dimension\n" + std::to_string(eps) + "," + std::to_string(dim) + "\n");
      out << "eluder_dimension=" << dim << " eps=" << eps << "\n";
      return kExitOk;
    }
    // cover
    const std::vector<double> eps{1.0, 0.5, 0.25, 0.125};
    const auto rows = cover_size_report(*cls, eps);
    std::ostringstream csv;
    csv << "eps,log_size,size\n";
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      csv << rows[i].eps << ',' << rows[i].log_size << ',' << rows[i].size << '\n';
      if (i && rows[i].log_size < rows[i - 1].log_size) monotone = false;
    }
    write_file(dir / "cover.csv", csv.str());
    out << (monotone ? "PASS" : "FAIL") << " cover sizes";
    for (const auto& r : rows) out << " " << r.eps << ":exp(" << r.log_size << ")";
    out << "\n";
    return monotone ? kExitOk : kExitCheckFailed;
  } catch (const InvalidInput& e) {
    err << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace rloss
