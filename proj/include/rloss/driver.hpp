#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "rloss/env.hpp"
#include "rloss/funclass.hpp"
#include "rloss/planner.hpp"
#include "rloss/subsampler.hpp"

namespace rloss {

enum class PlannerKind { A, B, RewardFree };
enum class BetaMode { TheoryA, TheoryB, TheoryRewardFree, Manual };
enum class SamplerPreset { Practical, Theory };

// Complexity measures entering the confidence width. NaN means unknown.
struct ClassStats {
  double log_cover = std::numeric_limits<double>::quiet_NaN();         // log N(F, delta / T^2)
  double log_cover_coarse = std::numeric_limits<double>::quiet_NaN();  // log N(F, 1 / K)
  double log_cover_points = std::numeric_limits<double>::quiet_NaN();  // log C(S x A, delta / T^2)
  double eluder = std::numeric_limits<double>::quiet_NaN();            // dim_E(F, 1 / T)
  double log_cover_reward = 0.0;                                       // log N(R, 1 / T)
};

// Finite classes: log |F| and the brute-force eluder dimension when
// S A <= 12 (S A otherwise). Linear classes: analytic covers and d ln T.
ClassStats class_stats(const FunctionClass& cls, int episodes, double delta);

// Confidence width for the chosen schedule; `constant` is the leading C and
// `zeta` the misspecification error (schedules A and reward-free only).
double beta_value(BetaMode mode, const ClassStats& stats, double total_steps, double delta,
                  int horizon, double constant = 1.0, double zeta = 0.0, double manual = 1.0);

struct RunConfig {
  int episodes = 100;
  double delta = 0.1;
  PlannerKind planner = PlannerKind::A;
  BetaMode beta_mode = BetaMode::Manual;
  double beta = 1.0;           // manual planner width
  double beta_constant = 1.0;  // C in the theory schedules
  double zeta = 0.0;
  SamplerPreset preset = SamplerPreset::Practical;
  double sampler_beta = 0.0;      // <= 0: planner width clamped to [1, T H^2]
  double sampler_constant = 0.0;  // > 0 overrides the preset's C
  double sampler_log_factor = 0.0;  // > 0 overrides the preset's L
  std::uint64_t seed = 1;
  ConfidenceSetConfig confidence;
  bool timing = false;            // wall_ms column; off keeps files reproducible
  bool keep_q_tables = true;

  void validate() const;
};

struct EpisodeRecord {
  int k = 0;
  int ktilde = 0;
  double regret_cum = 0.0;
  int n_switch = 0;
  std::int64_t big_oracle_calls = 0;
  std::int64_t small_oracle_calls = 0;
  std::vector<std::size_t> buffer_distinct;
  double wall_ms = 0.0;
};

struct PlanningPass {
  int episode = 0;       // k at which the policy was computed
  int active = 0;        // episodes it was deployed for
  bool switched = false;  // differs from the previous policy
  QTable q;
};

struct RunResult {
  std::vector<EpisodeRecord> records;
  std::vector<Trajectory> trajectories;
  StepData full_data;
  std::vector<SubDataset> buffers;
  std::vector<PlanningPass> passes;
  std::vector<PlannerTraceRow> planner_trace;
  OracleCounts counts;
  double beta = 0.0;
  SamplerConfig sampler;
  double optimal_value = 0.0;
  int recomputations = 0;
  int n_switch = 0;
  std::int64_t reward_reads = 0;  // environment reward lookups (reward-free exploration)
  GreedyPolicy final_policy;
};

// Header of the per-episode metrics CSV for horizon H.
std::string metrics_header(int horizon);
std::string metrics_row(const EpisodeRecord& r);

// The low-switching episode loop. When `metrics` is given, one row is written
// and flushed per episode. Planner-B needs a finite class.
RunResult rloss_run(const EpisodicMdp& env, const FunctionClass& cls, const RunConfig& config,
                    std::ostream* metrics = nullptr);

struct RewardFreeOutcome {
  double optimal_value = 0.0;
  double policy_value = 0.0;
  double suboptimality = 0.0;
  GreedyPolicy policy;
};

struct RewardFreeResult {
  RunResult exploration;
  std::vector<RewardFreeOutcome> outcomes;
};

// Reward-free exploration for K episodes, then one planning pass per reward.
RewardFreeResult reward_free_run(const EpisodicMdp& env, const FunctionClass& cls,
                                 const RunConfig& config, const std::vector<RewardTable>& rewards,
                                 std::ostream* metrics = nullptr);

// Exact V_1^pi(s1) by backward induction.
double evaluate_policy(const EpisodicMdp& env, const GreedyPolicy& policy,
                       const RewardTable* reward = nullptr);

// Summary JSON (final regret, switches, oracle totals, buffer sizes).
std::string summary_json(const RunResult& result, const RunConfig& config);

}  // namespace rloss
