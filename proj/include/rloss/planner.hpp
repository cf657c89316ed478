#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "rloss/env.hpp"
#include "rloss/funclass.hpp"
#include "rloss/optimizer.hpp"

namespace rloss {

// Transitions observed at step h, one per past episode: full_data[h][tau].
using StepData = std::vector<std::vector<Step>>;

// Dense Q_h(s, a) for h in [0, H).
class QTable {
 public:
  QTable() = default;
  QTable(int horizon, int num_states, int num_actions, double fill = 0.0);

  double operator()(int h, int s, int a) const { return values_[index(h, s, a)]; }
  double& at(int h, int s, int a) { return values_[index(h, s, a)]; }

  // max_a Q_h(s, a); zero at h == H.
  double value(int h, int s) const;
  // argmax_a Q_h(s, a), ties to the lowest action.
  int greedy(int h, int s) const;

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
};

class GreedyPolicy {
 public:
  GreedyPolicy() = default;
  GreedyPolicy(const QTable& q, int id);

  int act(int h, int s) const { return actions_[static_cast<std::size_t>(h) * num_states_ + s]; }
  int id() const { return id_; }
  // actions[h * S + s].
  const std::vector<int>& actions() const { return actions_; }

  // Same action everywhere; ids are ignored.
  bool same_actions(const GreedyPolicy& other) const { return actions_ == other.actions_; }

 private:
  int id_ = 0;
  int num_states_ = 0;
  std::vector<int> actions_;
};

struct QEstimate {
  std::vector<FunctionHandle> regressed;  // f_h
  std::vector<std::size_t> tuple;         // member indices (confidence-set planner)
  std::vector<double> bonus;              // [h][s][a]
  QTable q;
};

struct PlannerTraceRow {
  int pass = 0;
  int h = 0;
  double loss = 0.0;
  double bonus_min = 0.0;
  double bonus_mean = 0.0;
  double bonus_max = 0.0;
};

struct PlanResult {
  QEstimate estimate;
  GreedyPolicy policy;
  OracleCounts counts;
  std::vector<PlannerTraceRow> trace;
};

// sup |f1(z) - f2(z)| over pairs with ||f1 - f2||^2_buffer <= beta.
double bonus(const FunctionClass& cls, const WeightedSet& buffer, double beta, int s, int a,
             OracleCounts* counts = nullptr);

// Optimistic least-squares value iteration. Regression on the full data,
// bonus on the sub-sampled buffers, Q_h = min{f_h + b_h, H}.
PlanResult planner_a(const FunctionClass& cls, const StepData& full_data,
                     const std::vector<WeightedSet>& buffers, double beta, int id);

// Reward-free exploration: targets V_{h+1}(s') only and
// Q_h = min{f_h + b_h + min{b_h / H, 1}, H}.
PlanResult exploration_planner(const FunctionClass& cls, const StepData& full_data,
                               const std::vector<WeightedSet>& buffers, double beta, int id);

// Reward-free planning for a given reward: Q_h = min{f_h + b_h + r_h, H}.
PlanResult reward_free_plan(const FunctionClass& cls, const StepData& full_data,
                            const std::vector<WeightedSet>& buffers, const RewardTable& reward,
                            double beta, int id);

enum class CandidateMode { Product, Diagonal, List };

struct ConfidenceSetConfig {
  CandidateMode mode = CandidateMode::Product;
  std::vector<std::vector<std::size_t>> candidates;  // List mode, each of length H
  double work_cap = 1e8;                             // product mode: H |F|^2 |data| bound
};

// Range constraints ||f_h||_inf <= H - h (0-based h) and regression slack
// ||f_h||^2_{D_h(f_{h+1})} <= inf_g ||g||^2_{D_h(f_{h+1})} + beta with
// f_H == 0. The infimum goes through the regression oracle.
bool confidence_set_member(const FiniteClass& cls, const std::vector<std::size_t>& tuple,
                           const StepData& full_data, double beta);

// Global optimism: the confidence-set tuple maximizing max_a f_0(s1, a).
// Ties go to the lexicographically smallest tuple.
PlanResult planner_b(const FiniteClass& cls, const StepData& full_data, double beta,
                     int initial_state, int id, const ConfidenceSetConfig& config = {});

void write_planner_trace(std::ostream& out, const std::vector<PlannerTraceRow>& rows);

}  // namespace rloss
