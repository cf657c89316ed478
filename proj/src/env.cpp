#include "rloss/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rloss/errors.hpp"

namespace rloss {

RewardTable::RewardTable(int horizon, int num_states, int num_actions, double fill)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      values_(static_cast<std::size_t>(horizon) * num_states * num_actions, fill) {}

void RewardTable::validate() const {
  for (double r : values_) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw InvalidInput("reward value " + std::to_string(r) + " outside [0, 1]");
    }
  }
}

EpisodicMdp::EpisodicMdp(std::string kind, int num_states, int num_actions, int horizon,
                         int initial_state, std::vector<double> kernels, RewardTable rewards)
    : kind_(std::move(kind)),
      num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      initial_state_(initial_state),
      kernels_(std::move(kernels)),
      rewards_(std::move(rewards)) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    throw ConstructionError("MDP sizes must be positive");
  }
  if (initial_state < 0 || initial_state >= num_states) {
    throw ConstructionError("initial state out of range");
  }
  const auto expected = static_cast<std::size_t>(horizon) * num_states * num_actions * num_states;
  if (kernels_.size() != expected) throw ConstructionError("kernel table has wrong size");
  if (rewards_.horizon() != horizon || rewards_.num_states() != num_states ||
      rewards_.num_actions() != num_actions) {
    throw ConstructionError("reward table shape does not match the MDP");
  }
  validate();
}

std::span<const double> EpisodicMdp::transition_row(int h, int s, int a) const {
  const auto offset =
      ((static_cast<std::size_t>(h) * num_states_ + s) * num_actions_ + a) * num_states_;
  return {kernels_.data() + offset, static_cast<std::size_t>(num_states_)};
}

void EpisodicMdp::check_step(int h, int s, int a) const {
  if (h < 0 || h >= horizon_) throw InvalidInput("step index " + std::to_string(h) + " outside [0, H)");
  if (s < 0 || s >= num_states_) throw InvalidInput("state " + std::to_string(s) + " out of range");
  if (a < 0 || a >= num_actions_) throw InvalidInput("action " + std::to_string(a) + " out of range");
}

int EpisodicMdp::sample_next(Rng& rng, int h, int s, int a) const {
  check_step(h, s, a);
  const auto row = transition_row(h, s, a);
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (int next = 0; next < num_states_; ++next) {
    if (row[next] <= 0.0) continue;
    last_positive = next;
    acc += row[next];
    if (u < acc) return next;
  }
  return last_positive;
}

std::pair<double, int> EpisodicMdp::step(Rng& rng, int h, int s, int a) const {
  const int next = sample_next(rng, h, s, a);
  return {rewards_(h, s, a), next};
}

void EpisodicMdp::set_features(Eigen::MatrixXd features) {
  if (features.rows() != static_cast<Eigen::Index>(num_states_) * num_actions_) {
    throw ConstructionError("feature matrix must have S * A rows");
  }
  features_ = std::move(features);
}

void EpisodicMdp::validate() const {
  for (int h = 0; h < horizon_; ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_actions_; ++a) {
        double sum = 0.0;
        for (double p : transition_row(h, s, a)) {
          if (p < 0.0) throw ConstructionError("negative transition probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConstructionError("transition row does not sum to 1");
        const double r = rewards_(h, s, a);
        if (!(r >= 0.0 && r <= 1.0)) throw ConstructionError("reward outside [0, 1]");
      }
    }
  }
}

namespace {

// Symmetric Dirichlet(1) sample: normalized i.i.d. exponentials.
void dirichlet_row(Rng& rng, std::span<double> out) {
  double total = 0.0;
  for (double& x : out) {
    x = -std::log1p(-uniform01(rng));
    total += x;
  }
  for (double& x : out) x /= total;
}

}  // namespace

EpisodicMdp make_tabular_random(std::uint64_t seed, int num_states, int num_actions, int horizon) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    throw InvalidInput("tabular MDP needs S, A, H >= 1");
  }
  Rng rng = make_rng(seed, 101);
  std::vector<double> kernels(static_cast<std::size_t>(horizon) * num_states * num_actions * num_states);
  for (std::size_t row = 0; row < kernels.size() / num_states; ++row) {
    dirichlet_row(rng, std::span<double>(kernels.data() + row * num_states, num_states));
  }
  RewardTable rewards(horizon, num_states, num_actions);
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) rewards.at(h, s, a) = uniform01(rng);
  return EpisodicMdp("tabular", num_states, num_actions, horizon, 0, std::move(kernels),
                     std::move(rewards));
}

EpisodicMdp make_linear_mdp(std::uint64_t seed, int dim, int num_states, int num_actions,
                            int horizon) {
  if (dim < 1 || num_states < 1 || num_actions < 1 || horizon < 1) {
    throw InvalidInput("linear MDP needs d, S, A, H >= 1");
  }
  if (dim > num_states * num_actions) throw InvalidInput("linear MDP needs d <= S * A");
  Rng rng = make_rng(seed, 202);
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int rows = num_states * num_actions;
    Eigen::MatrixXd phi(rows, dim);
    std::vector<double> buf(dim);
    for (int r = 0; r < rows; ++r) {
      dirichlet_row(rng, buf);
      for (int i = 0; i < dim; ++i) phi(r, i) = buf[i];
    }
    std::vector<double> kernels(static_cast<std::size_t>(horizon) * rows * num_states, 0.0);
    RewardTable rewards(horizon, num_states, num_actions);
    std::vector<double> mu(static_cast<std::size_t>(dim) * num_states);
    std::vector<double> theta(dim);
    for (int h = 0; h < horizon; ++h) {
      for (int i = 0; i < dim; ++i) {
        dirichlet_row(rng, std::span<double>(mu.data() + static_cast<std::size_t>(i) * num_states, num_states));
      }
      for (double& t : theta) t = uniform01(rng);
      for (int r = 0; r < rows; ++r) {
        double* row = kernels.data() + (static_cast<std::size_t>(h) * rows + r) * num_states;
        double reward = 0.0;
        for (int i = 0; i < dim; ++i) {
          reward += phi(r, i) * theta[i];
          for (int next = 0; next < num_states; ++next) {
            row[next] += phi(r, i) * mu[static_cast<std::size_t>(i) * num_states + next];
          }
        }
        rewards.at(h, r / num_actions, r % num_actions) = std::clamp(reward, 0.0, 1.0);
      }
    }
    try {
      EpisodicMdp env("linear", num_states, num_actions, horizon, 0, std::move(kernels),
                      std::move(rewards));
      env.set_features(std::move(phi));
      return env;
    } catch (const ConstructionError&) {
      // resample
    }
  }
  throw ConstructionError("linear MDP generator failed to produce valid kernels");
}

int chain_correct_action(int state) { return state % 2 == 0 ? 1 : 0; }

EpisodicMdp make_chain(int horizon, int length) {
  if (length < 1 || horizon < 1) throw InvalidInput("chain needs length, H >= 1");
  if (length > horizon) throw InvalidInput("chain length must not exceed the horizon");
  const int goal = length;
  const int fail = length + 1;
  const int ns = length + 2;
  const int na = 2;
  std::vector<double> kernels(static_cast<std::size_t>(horizon) * ns * na * ns, 0.0);
  RewardTable rewards(horizon, ns, na);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        int next = s;
        if (s < length) {
          const bool advance = a == chain_correct_action(s);
          next = advance ? s + 1 : fail;
          if (advance && s == length - 1) rewards.at(h, s, a) = 1.0;
        }
        kernels[((static_cast<std::size_t>(h) * ns + s) * na + a) * ns + next] = 1.0;
      }
    }
  }
  EpisodicMdp env("chain", ns, na, horizon, 0, std::move(kernels), std::move(rewards));
  env.set_goal_state(goal);
  return env;
}

ValueTable::ValueTable(int horizon, int num_states, int num_actions)
    : horizon_(horizon),
      ns_(num_states),
      na_(num_actions),
      q_(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0),
      v_(static_cast<std::size_t>(horizon + 1) * num_states, 0.0) {}

namespace {

const RewardTable& pick_reward(const EpisodicMdp& env, const RewardTable* reward) {
  if (reward == nullptr) return env.rewards();
  if (reward->horizon() != env.horizon() || reward->num_states() != env.num_states() ||
      reward->num_actions() != env.num_actions()) {
    throw InvalidInput("reward table shape does not match the MDP");
  }
  return *reward;
}

}  // namespace

ValueTable exact_optimal_values(const EpisodicMdp& env, const RewardTable* reward) {
  const RewardTable& r = pick_reward(env, reward);
  ValueTable table(env.horizon(), env.num_states(), env.num_actions());
  for (int h = env.horizon() - 1; h >= 0; --h) {
    for (int s = 0; s < env.num_states(); ++s) {
      double best = -1.0;
      for (int a = 0; a < env.num_actions(); ++a) {
        double q = r(h, s, a);
        const auto row = env.transition_row(h, s, a);
        for (int next = 0; next < env.num_states(); ++next) q += row[next] * table.v(h + 1, next);
        table.q(h, s, a) = q;
        best = std::max(best, q);
      }
      table.v(h, s) = best;
    }
  }
  return table;
}

ValueTable policy_values(const EpisodicMdp& env, std::span<const int> actions,
                         const RewardTable* reward) {
  const RewardTable& r = pick_reward(env, reward);
  if (actions.size() != static_cast<std::size_t>(env.horizon()) * env.num_states()) {
    throw InvalidInput("policy table must have H * S entries");
  }
  ValueTable table(env.horizon(), env.num_states(), env.num_actions());
  for (int h = env.horizon() - 1; h >= 0; --h) {
    for (int s = 0; s < env.num_states(); ++s) {
      for (int a = 0; a < env.num_actions(); ++a) {
        double q = r(h, s, a);
        const auto row = env.transition_row(h, s, a);
        for (int next = 0; next < env.num_states(); ++next) q += row[next] * table.v(h + 1, next);
        table.q(h, s, a) = q;
      }
      const int a = actions[static_cast<std::size_t>(h) * env.num_states() + s];
      if (a < 0 || a >= env.num_actions()) throw InvalidInput("policy action out of range");
      table.v(h, s) = table.q(h, s, a);
    }
  }
  return table;
}

namespace {

void put(std::ostringstream& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out << buf;
}

}  // namespace

std::string dump_text(const EpisodicMdp& env) {
  std::ostringstream out;
  const int ns = env.num_states(), na = env.num_actions(), hz = env.horizon();
  out << "mdp " << env.kind() << ' ' << ns << ' ' << na << ' ' << hz << ' ' << env.initial_state()
      << ' ' << (env.goal_state() ? *env.goal_state() : -1) << '\n';
  for (int h = 0; h < hz; ++h) {
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        out << "P " << h << ' ' << s << ' ' << a;
        for (double p : env.transition_row(h, s, a)) {
          out << ' ';
          put(out, p);
        }
        out << "\nR " << h << ' ' << s << ' ' << a << ' ';
        put(out, env.reward(h, s, a));
        out << '\n';
      }
    }
  }
  if (const auto& phi = env.features()) {
    out << "features " << phi->cols() << '\n';
    for (Eigen::Index r = 0; r < phi->rows(); ++r) {
      out << "F " << r;
      for (Eigen::Index c = 0; c < phi->cols(); ++c) {
        out << ' ';
        put(out, (*phi)(r, c));
      }
      out << '\n';
    }
  }
  return out.str();
}

EpisodicMdp parse_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag, kind;
  int ns = 0, na = 0, hz = 0, s1 = 0, goal = -1;
  if (!(in >> tag >> kind >> ns >> na >> hz >> s1 >> goal) || tag != "mdp") {
    throw InvalidInput("MDP dump: bad header");
  }
  if (ns < 1 || na < 1 || hz < 1) throw InvalidInput("MDP dump: bad sizes");
  std::vector<double> kernels(static_cast<std::size_t>(hz) * ns * na * ns);
  RewardTable rewards(hz, ns, na);
  std::optional<Eigen::MatrixXd> phi;
  while (in >> tag) {
    if (tag == "P") {
      int h, s, a;
      in >> h >> s >> a;
      if (!in || h < 0 || h >= hz || s < 0 || s >= ns || a < 0 || a >= na) {
        throw InvalidInput("MDP dump: bad kernel row index");
      }
      double* row = kernels.data() + ((static_cast<std::size_t>(h) * ns + s) * na + a) * ns;
      for (int i = 0; i < ns; ++i) in >> row[i];
    } else if (tag == "R") {
      int h, s, a;
      double r;
      in >> h >> s >> a >> r;
      if (!in || h < 0 || h >= hz || s < 0 || s >= ns || a < 0 || a >= na) {
        throw InvalidInput("MDP dump: bad reward index");
      }
      rewards.at(h, s, a) = r;
    } else if (tag == "features") {
      int d = 0;
      in >> d;
      if (!in || d < 1) throw InvalidInput("MDP dump: bad feature dimension");
      phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns) * na, d);
    } else if (tag == "F") {
      int r;
      in >> r;
      if (!phi || !in || r < 0 || r >= phi->rows()) throw InvalidInput("MDP dump: bad feature row");
      for (Eigen::Index c = 0; c < phi->cols(); ++c) in >> (*phi)(r, c);
    } else {
      throw InvalidInput("MDP dump: unknown record '" + tag + "'");
    }
    if (!in) throw InvalidInput("MDP dump: truncated record");
  }
  EpisodicMdp env(kind, ns, na, hz, s1, std::move(kernels), std::move(rewards));
  if (phi) env.set_features(std::move(*phi));
  if (goal >= 0) env.set_goal_state(goal);
  return env;
}

}  // namespace rloss
