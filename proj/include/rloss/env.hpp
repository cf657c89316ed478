#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rloss/rng.hpp"

namespace rloss {

// Step indices are 0-based throughout the library: h = 0 is the first step of
// an episode and h = H - 1 the last.

// r_h(s, a) for every step, stored densely as [h][s][a].
class RewardTable {
 public:
  RewardTable() = default;
  RewardTable(int horizon, int num_states, int num_actions, double fill = 0.0);

  double operator()(int h, int s, int a) const { return values_[index(h, s, a)]; }
  double& at(int h, int s, int a) { return values_[index(h, s, a)]; }

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  const std::vector<double>& values() const { return values_; }

  // Throws InvalidInput when any entry leaves [0, 1].
  void validate() const;

 private:
  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a;
  }

  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
};

struct Step {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
};

struct Trajectory {
  int episode = 0;
  std::vector<Step> steps;
};

// Finite-horizon MDP with an enumerable state space, a fixed initial state
// and dense row-stochastic kernels. Immutable after construction.
class EpisodicMdp {
 public:
  EpisodicMdp(std::string kind, int num_states, int num_actions, int horizon, int initial_state,
              std::vector<double> kernels, RewardTable rewards);

  const std::string& kind() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }
  int initial_state() const { return initial_state_; }

  int reset() const { return initial_state_; }

  // P_h(. | s, a) as a span of length num_states().
  std::span<const double> transition_row(int h, int s, int a) const;
  double reward(int h, int s, int a) const { return rewards_(h, s, a); }
  const RewardTable& rewards() const { return rewards_; }

  // Draws s' ~ P_h(. | s, a) with one uniform draw from rng.
  int sample_next(Rng& rng, int h, int s, int a) const;
  // (reward, next_state). Throws InvalidInput on bad step, state or action.
  std::pair<double, int> step(Rng& rng, int h, int s, int a) const;

  // Linear MDPs carry their feature map: row s * A + a holds phi(s, a).
  const std::optional<Eigen::MatrixXd>& features() const { return features_; }
  void set_features(Eigen::MatrixXd features);

  // The rewarding terminal state of chain instances.
  std::optional<int> goal_state() const { return goal_state_; }
  void set_goal_state(int s) { goal_state_ = s; }

  // Row sums within 1e-9 and rewards in [0, 1]; throws ConstructionError.
  void validate() const;

 private:
  void check_step(int h, int s, int a) const;

  std::string kind_;
  int num_states_;
  int num_actions_;
  int horizon_;
  int initial_state_;
  std::vector<double> kernels_;  // [h][s][a][s']
  RewardTable rewards_;
  std::optional<Eigen::MatrixXd> features_;
  std::optional<int> goal_state_;
};

EpisodicMdp make_tabular_random(std::uint64_t seed, int num_states, int num_actions, int horizon);

// phi(s, a) lies on the probability simplex of R^d, mu_h(., i) are
// distributions over states, theta_h in [0, 1]^d. Hence
// P_h(s'|s,a) = phi^T mu_h(s') and r_h = phi^T theta_h are valid by
// construction.
EpisodicMdp make_linear_mdp(std::uint64_t seed, int dim, int num_states, int num_actions,
                            int horizon);

// Combination lock: states 0..length-1 form the lock, `length` is the goal
// and `length + 1` an absorbing failure state. Exactly one action per lock
// state advances; the last advance pays reward 1.
EpisodicMdp make_chain(int horizon, int length);

int chain_correct_action(int state);

// Q*_h and V*_h by backward induction; V_{H} == 0. Optional reward override.
class ValueTable {
 public:
  ValueTable(int horizon, int num_states, int num_actions);

  double q(int h, int s, int a) const { return q_[(static_cast<std::size_t>(h) * ns_ + s) * na_ + a]; }
  double& q(int h, int s, int a) { return q_[(static_cast<std::size_t>(h) * ns_ + s) * na_ + a]; }
  // v(H, s) == 0.
  double v(int h, int s) const { return v_[static_cast<std::size_t>(h) * ns_ + s]; }
  double& v(int h, int s) { return v_[static_cast<std::size_t>(h) * ns_ + s]; }

  int horizon() const { return horizon_; }
  int num_states() const { return ns_; }
  int num_actions() const { return na_; }

 private:
  int horizon_, ns_, na_;
  std::vector<double> q_;
  std::vector<double> v_;
};

ValueTable exact_optimal_values(const EpisodicMdp& env, const RewardTable* reward = nullptr);

// V^pi for a deterministic policy given as actions[h * S + s].
ValueTable policy_values(const EpisodicMdp& env, std::span<const int> actions,
                         const RewardTable* reward = nullptr);

// Round-trip text form: header, kernels, rewards, optional features.
std::string dump_text(const EpisodicMdp& env);
EpisodicMdp parse_text(std::string_view text);

}  // namespace rloss
