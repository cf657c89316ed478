#include "rloss/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "json.hpp"

#include "rloss/diagnostics.hpp"
#include "rloss/errors.hpp"

namespace rloss {

ClassStats class_stats(const FunctionClass& cls, int episodes, double delta) {
  const double t = static_cast<double>(episodes) * cls.horizon();
  const int points = cls.num_states() * cls.num_actions();
  ClassStats st;
  st.log_cover_points = std::log(static_cast<double>(points));
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    st.log_cover = std::log(static_cast<double>(finite->size()));
    st.log_cover_coarse = st.log_cover;
    if (points <= kEluderPoolLimit) {
      std::vector<StateAction> pool;
      for (int s = 0; s < cls.num_states(); ++s) {
        for (int a = 0; a < cls.num_actions(); ++a) pool.push_back(cls.point(s, a));
      }
      st.eluder = eluder_dimension_bruteforce(*finite, pool, 1.0 / t);
    } else {
      st.eluder = points;
    }
  } else {
    const auto& linear = dynamic_cast<const LinearClass&>(cls);
    st.log_cover = cls.log_cover_size(delta / (t * t));
    st.log_cover_coarse = cls.log_cover_size(1.0 / episodes);
    st.eluder = linear.dim() * std::max(1.0, std::log(t));
  }
  return st;
}

double beta_value(BetaMode mode, const ClassStats& stats, double total_steps, double delta,
                  int horizon, double constant, double zeta, double manual) {
  if (mode == BetaMode::Manual) return manual;
  if (!(total_steps >= 1.0)) throw InvalidInput("total_steps must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  if (!(zeta >= 0.0)) throw InvalidInput("zeta must be nonnegative");
  const double h2 = static_cast<double>(horizon) * horizon;
  const double lt = std::log(total_steps / delta);
  if (mode == BetaMode::TheoryB) {
    if (std::isnan(stats.log_cover_coarse)) throw InvalidInput("class stats lack log_cover_coarse");
    if (zeta != 0.0) throw InvalidInput("zeta is only defined for the A and reward-free schedules");
    return constant * h2 * (lt + stats.log_cover_coarse);
  }
  if (std::isnan(stats.log_cover) || std::isnan(stats.eluder) || std::isnan(stats.log_cover_points)) {
    throw InvalidInput("class stats lack cover sizes or the eluder dimension");
  }
  const double ln_t = std::log(total_steps);
  const double core = h2 * (lt + stats.log_cover) * stats.eluder * ln_t * ln_t *
                      (stats.log_cover_points + lt);
  double beta = constant * (core + total_steps * zeta);
  if (mode == BetaMode::TheoryRewardFree) beta += constant * h2 * stats.log_cover_reward * stats.eluder;
  return beta;
}

void RunConfig::validate() const {
  if (episodes < 1) throw InvalidInput("episodes must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  if (beta_mode == BetaMode::Manual && !(beta >= 0.0)) throw InvalidInput("beta must be nonnegative");
  if (!(beta_constant > 0.0)) throw InvalidInput("beta_constant must be positive");
  if (!(zeta >= 0.0)) throw InvalidInput("zeta must be nonnegative");
  if (planner == PlannerKind::B && zeta != 0.0) throw InvalidInput("zeta is not supported by planner B");
}

std::string metrics_header(int horizon) {
  std::string out = "k,ktilde,regret_cum,n_switch,big_oracle_calls,small_oracle_calls";
  for (int h = 1; h <= horizon; ++h) out += ",buffer_distinct_h" + std::to_string(h);
  return out + ",wall_ms";
}

std::string metrics_row(const EpisodeRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d,%lld,%lld", r.k, r.ktilde, r.regret_cum, r.n_switch,
                static_cast<long long>(r.big_oracle_calls), static_cast<long long>(r.small_oracle_calls));
  std::string out = buf;
  for (auto d : r.buffer_distinct) out += "," + std::to_string(d);
  std::snprintf(buf, sizeof buf, ",%.3f", r.wall_ms);
  return out + buf;
}

double evaluate_policy(const EpisodicMdp& env, const GreedyPolicy& policy, const RewardTable* reward) {
  return policy_values(env, policy.actions(), reward).v(0, env.initial_state());
}

namespace {

// Read-only view handed to the exploration loop: transitions are available,
// reward lookups are counted.
class RewardFreeView {
 public:
  explicit RewardFreeView(const EpisodicMdp& env) : env_(env) {}
  int reset() const { return env_.reset(); }
  int transition(Rng& rng, int h, int s, int a) const { return env_.sample_next(rng, h, s, a); }
  double reward(int h, int s, int a) {
    ++reads_;
    return env_.reward(h, s, a);
  }
  std::int64_t reads() const { return reads_; }

 private:
  const EpisodicMdp& env_;
  std::int64_t reads_ = 0;
};

SamplerConfig make_sampler(const FunctionClass& cls, const RunConfig& cfg, double planner_beta) {
  const int H = cls.horizon();
  const double t = static_cast<double>(cfg.episodes) * H;
  double beta = cfg.sampler_beta > 0.0 ? cfg.sampler_beta : planner_beta;
  beta = std::clamp(beta, 1.0, t * H * H);
  SamplerConfig sc = cfg.preset == SamplerPreset::Theory
                         ? SamplerConfig::theory(cls, cfg.episodes, cfg.delta, beta)
                         : SamplerConfig::practical(cfg.episodes, H, cfg.delta, beta);
  if (cfg.sampler_constant > 0.0) sc.constant = cfg.sampler_constant;
  if (cfg.sampler_log_factor > 0.0) sc.log_factor = cfg.sampler_log_factor;
  sc.validate();
  return sc;
}

RunResult run_loop(const EpisodicMdp& env, const FunctionClass& cls, const RunConfig& cfg,
                   std::ostream* metrics, bool reward_free) {
  cfg.validate();
  const int H = env.horizon();
  if (cls.horizon() != H || cls.num_states() != env.num_states() ||
      cls.num_actions() != env.num_actions()) {
    throw InvalidInput("function class does not match the environment");
  }
  const FiniteClass* finite = dynamic_cast<const FiniteClass*>(&cls);
  if (cfg.planner == PlannerKind::B && finite == nullptr) {
    throw UnsupportedError("planner B needs a finite class");
  }
  if (reward_free && cfg.planner != PlannerKind::RewardFree) {
    throw InvalidInput("reward-free runs need planner = reward_free");
  }
  if (!reward_free && cfg.planner == PlannerKind::RewardFree) {
    throw InvalidInput("use the reward-free entry point for planner = reward_free");
  }

  RunResult res;
  const double t = static_cast<double>(cfg.episodes) * H;
  if (cfg.beta_mode == BetaMode::Manual) {
    res.beta = cfg.beta;
  } else {
    res.beta = beta_value(cfg.beta_mode, class_stats(cls, cfg.episodes, cfg.delta), t, cfg.delta, H,
                          cfg.beta_constant, cfg.zeta);
  }
  res.sampler = make_sampler(cls, cfg, res.beta);
  res.buffers.assign(static_cast<std::size_t>(H), SubDataset{});
  res.full_data.assign(static_cast<std::size_t>(H), {});
  if (!reward_free) res.optimal_value = exact_optimal_values(env).v(0, env.initial_state());

  Rng env_rng = make_rng(cfg.seed, 1);
  Rng sampler_rng = make_rng(cfg.seed, 2);
  RewardFreeView view(env);

  // Scores only depend on the buffer and the point, so they are reused
  // until the buffer changes.
  std::vector<std::map<StateAction, double>> score_cache(static_cast<std::size_t>(H));
  std::vector<std::uint64_t> cache_gen(static_cast<std::size_t>(H), 0);

  GreedyPolicy policy;
  double policy_value = 0.0;
  int ktilde = 0;
  double regret = 0.0;
  const auto start = std::chrono::steady_clock::now();
  if (metrics) *metrics << metrics_header(H) << '\n' << std::flush;

  for (int k = 1; k <= cfg.episodes; ++k) {
    bool changed = (k == 1);
    if (k > 1) {
      const Trajectory& prev = res.trajectories.back();
      for (int h = 0; h < H; ++h) {
        auto& buf = res.buffers[static_cast<std::size_t>(h)];
        const StateAction z = cls.point(prev.steps[h].state, prev.steps[h].action);
        auto& cache = score_cache[static_cast<std::size_t>(h)];
        if (cache_gen[static_cast<std::size_t>(h)] != buf.generation()) {
          cache.clear();
          cache_gen[static_cast<std::size_t>(h)] = buf.generation();
        }
        auto it = cache.find(z);
        if (it == cache.end()) {
          const double score = sensitivity_score(cls, buf.as_weighted_set(), z, res.sampler, &res.counts);
          it = cache.emplace(z, score).first;
        }
        if (online_sample_scored(cls, buf, z, it->second, res.sampler, sampler_rng, prev.episode)) {
          changed = true;
        }
      }
    }

    if (changed) {
      std::vector<WeightedSet> sets;
      for (const auto& b : res.buffers) sets.push_back(b.as_weighted_set());
      PlanResult plan;
      switch (cfg.planner) {
        case PlannerKind::A:
          plan = planner_a(cls, res.full_data, sets, res.beta, k);
          break;
        case PlannerKind::B:
          plan = planner_b(*finite, res.full_data, res.beta, env.initial_state(), k, cfg.confidence);
          break;
        case PlannerKind::RewardFree:
          plan = exploration_planner(cls, res.full_data, sets, res.beta, k);
          break;
      }
      res.counts += plan.counts;
      res.planner_trace.insert(res.planner_trace.end(), plan.trace.begin(), plan.trace.end());
      ++res.recomputations;
      const bool switched = k > 1 && !plan.policy.same_actions(policy);
      if (switched) ++res.n_switch;
      if (k == 1 || switched) {
        policy = plan.policy;
        if (!reward_free) policy_value = evaluate_policy(env, policy);
      }
      ktilde = k;
      PlanningPass pass;
      pass.episode = k;
      pass.switched = switched;
      if (cfg.keep_q_tables) pass.q = std::move(plan.estimate.q);
      res.passes.push_back(std::move(pass));
    }
    ++res.passes.back().active;

    Trajectory traj;
    traj.episode = k;
    int s = env.reset();
    for (int h = 0; h < H; ++h) {
      const int a = policy.act(h, s);
      Step st{s, a, 0.0, 0};
      if (reward_free) {
        st.next_state = view.transition(env_rng, h, s, a);
      } else {
        std::tie(st.reward, st.next_state) = env.step(env_rng, h, s, a);
      }
      res.full_data[static_cast<std::size_t>(h)].push_back(st);
      traj.steps.push_back(st);
      s = st.next_state;
    }
    res.trajectories.push_back(std::move(traj));

    if (!reward_free) regret += res.optimal_value - policy_value;
    EpisodeRecord rec;
    rec.k = k;
    rec.ktilde = ktilde;
    rec.regret_cum = regret;
    rec.n_switch = res.n_switch;
    rec.big_oracle_calls = cfg.planner == PlannerKind::B ? res.counts.nested : res.counts.big;
    rec.small_oracle_calls = res.counts.small;
    for (const auto& b : res.buffers) rec.buffer_distinct.push_back(b.distinct_count());
    if (cfg.timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    if (metrics) *metrics << metrics_row(rec) << '\n' << std::flush;
    res.records.push_back(std::move(rec));
  }
  res.final_policy = policy;
  res.reward_reads = view.reads();
  return res;
}

}  // namespace

RunResult rloss_run(const EpisodicMdp& env, const FunctionClass& cls, const RunConfig& config,
                    std::ostream* metrics) {
  return run_loop(env, cls, config, metrics, false);
}

RewardFreeResult reward_free_run(const EpisodicMdp& env, const FunctionClass& cls,
                                 const RunConfig& config, const std::vector<RewardTable>& rewards,
                                 std::ostream* metrics) {
  for (const auto& r : rewards) {
    if (r.horizon() != env.horizon() || r.num_states() != env.num_states() ||
        r.num_actions() != env.num_actions()) {
      throw InvalidInput("reward table shape does not match the environment");
    }
    r.validate();
  }
  RewardFreeResult out;
  out.exploration = run_loop(env, cls, config, metrics, true);
  const auto& ex = out.exploration;
  std::vector<WeightedSet> sets;
  for (const auto& b : ex.buffers) sets.push_back(b.as_weighted_set());
  for (const auto& r : rewards) {
    RewardFreeOutcome o;
    const PlanResult plan = reward_free_plan(cls, ex.full_data, sets, r, ex.beta, config.episodes + 1);
    o.policy = plan.policy;
    o.optimal_value = exact_optimal_values(env, &r).v(0, env.initial_state());
    o.policy_value = evaluate_policy(env, o.policy, &r);
    o.suboptimality = o.optimal_value - o.policy_value;
    out.outcomes.push_back(std::move(o));
  }
  return out;
}

std::string summary_json(const RunResult& result, const RunConfig& config) {
  nlohmann::ordered_json j;
  j["episodes"] = config.episodes;
  j["seed"] = config.seed;
  j["beta"] = result.beta;
  j["sampler"] = {{"constant", result.sampler.constant},
                  {"log_factor", result.sampler.log_factor},
                  {"beta", result.sampler.beta},
                  {"round_eps", result.sampler.round_eps}};
  j["optimal_value"] = result.optimal_value;
  j["final_regret"] = result.records.empty() ? 0.0 : result.records.back().regret_cum;
  j["final_switches"] = result.n_switch;
  j["recomputations"] = result.recomputations;
  j["big_oracle_calls"] = result.counts.big;
  j["small_oracle_calls"] = result.counts.small;
  j["nested_oracle_calls"] = result.counts.nested;
  std::vector<std::size_t> distinct;
  std::vector<std::size_t> unique;
  for (const auto& b : result.buffers) {
    distinct.push_back(b.distinct_count());
    unique.push_back(b.unique_points());
  }
  j["buffer_distinct"] = distinct;
  j["buffer_unique_points"] = unique;
  j["reward_reads"] = result.reward_reads;
  return j.dump(2) + "\n";
}

}  // namespace rloss
