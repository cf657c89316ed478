#include "rloss/planner.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include "rloss/errors.hpp"

namespace rloss {

QTable::QTable(int horizon, int num_states, int num_actions, double fill)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      values_(static_cast<std::size_t>(horizon) * num_states * num_actions, fill) {}

double QTable::value(int h, int s) const {
  if (h >= horizon_) return 0.0;
  double best = (*this)(h, s, 0);
  for (int a = 1; a < num_actions_; ++a) best = std::max(best, (*this)(h, s, a));
  return best;
}

int QTable::greedy(int h, int s) const {
  int best = 0;
  for (int a = 1; a < num_actions_; ++a) {
    if ((*this)(h, s, a) > (*this)(h, s, best)) best = a;
  }
  return best;
}

GreedyPolicy::GreedyPolicy(const QTable& q, int id) : id_(id), num_states_(q.num_states()) {
  actions_.resize(static_cast<std::size_t>(q.horizon()) * q.num_states());
  for (int h = 0; h < q.horizon(); ++h) {
    for (int s = 0; s < q.num_states(); ++s) actions_[static_cast<std::size_t>(h) * num_states_ + s] = q.greedy(h, s);
  }
}

namespace {

// Transitions of one step collapsed to (s, a, s', r) with multiplicities.
struct Cell {
  int state;
  int action;
  int next_state;
  double reward;
  double count;
};

std::vector<Cell> aggregate(const std::vector<Step>& steps) {
  std::map<std::tuple<int, int, int, double>, double> counts;
  for (const auto& st : steps) counts[{st.state, st.action, st.next_state, st.reward}] += 1.0;
  std::vector<Cell> cells;
  cells.reserve(counts.size());
  for (const auto& [key, n] : counts) {
    cells.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), n});
  }
  return cells;
}

void check_shapes(const FunctionClass& cls, const StepData& full_data,
                  const std::vector<WeightedSet>* buffers) {
  const auto hz = static_cast<std::size_t>(cls.horizon());
  if (full_data.size() != hz) throw InvalidInput("full data must hold one list per step");
  if (buffers && buffers->size() != hz) throw InvalidInput("one buffer per step required");
  for (const auto& steps : full_data) {
    if (steps.size() != full_data.front().size()) {
      throw InvalidInput("full data must be index-aligned across steps");
    }
  }
}

// Bonuses at every (s, a) of one step.
std::vector<double> bonus_row(const FunctionClass& cls, const WeightedSet& buffer, double beta,
                              OracleCounts& counts) {
  const int S = cls.num_states();
  const int A = cls.num_actions();
  std::vector<double> out(static_cast<std::size_t>(S) * A, 0.0);
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    if (beta < 0.0) throw InvalidInput("bonus needs beta >= 0");
    FinitePairNorms norms(*finite, buffer);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) out[static_cast<std::size_t>(s) * A + a] = norms.constrained_max(cls.point(s, a), beta).value;
    }
    counts.small += static_cast<std::int64_t>(out.size());
    return out;
  }
  const LinearDataSummary summary(dynamic_cast<const LinearClass&>(cls), buffer);
  const auto cells = static_cast<std::ptrdiff_t>(out.size());
  std::int64_t small = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : small)
  for (std::ptrdiff_t idx = 0; idx < cells; ++idx) {
    OracleCounts local;
    out[static_cast<std::size_t>(idx)] =
        summary.constrained_max(cls.point(static_cast<int>(idx / A), static_cast<int>(idx % A)), beta, &local);
    small += local.small;
  }
  counts.small += small;
  return out;
}

enum class Mode { Reward, Exploration, Planning };

PlanResult lsvi(const FunctionClass& cls, const StepData& full_data,
                const std::vector<WeightedSet>& buffers, double beta, Mode mode,
                const RewardTable* reward, int id) {
  check_shapes(cls, full_data, &buffers);
  const int H = cls.horizon();
  const int S = cls.num_states();
  const int A = cls.num_actions();
  PlanResult out;
  auto& est = out.estimate;
  est.q = QTable(H, S, A);
  est.bonus.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  est.regressed.assign(static_cast<std::size_t>(H), cls.zero());

  for (int h = H - 1; h >= 0; --h) {
    const auto b = bonus_row(cls, buffers[static_cast<std::size_t>(h)], beta, out.counts);

    RegressionData data;
    for (const auto& c : aggregate(full_data[static_cast<std::size_t>(h)])) {
      const double target = (mode == Mode::Reward ? c.reward : 0.0) + est.q.value(h + 1, c.next_state);
      data.push_back({c.count, cls.point(c.state, c.action), target});
    }
    const FunctionHandle f = cls.regress(data);
    ++out.counts.big;

    double loss = 0.0;
    for (const auto& sample : data) {
      const double r = cls.evaluate(f, sample.point) - sample.target;
      loss += sample.weight * r * r;
    }

    double bsum = 0.0;
    double bmin = std::numeric_limits<double>::infinity();
    double bmax = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double bv = b[static_cast<std::size_t>(s) * A + a];
        double extra = 0.0;
        if (mode == Mode::Exploration) extra = std::min(bv / H, 1.0);
        if (mode == Mode::Planning) extra = (*reward)(h, s, a);
        est.q.at(h, s, a) = std::min(cls.evaluate(f, cls.point(s, a)) + bv + extra, static_cast<double>(H));
        est.bonus[(static_cast<std::size_t>(h) * S + s) * A + a] = bv;
        bsum += bv;
        bmin = std::min(bmin, bv);
        bmax = std::max(bmax, bv);
      }
    }
    est.regressed[static_cast<std::size_t>(h)] = f;
    out.trace.push_back({id, h, loss, bmin, bsum / (S * A), bmax});
  }
  out.policy = GreedyPolicy(est.q, id);
  return out;
}

}  // namespace

double bonus(const FunctionClass& cls, const WeightedSet& buffer, double beta, int s, int a,
             OracleCounts* counts) {
  const StateAction z = cls.point(s, a);
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    if (beta < 0.0) throw InvalidInput("bonus needs beta >= 0");
    if (counts) ++counts->small;
    return FinitePairNorms(*finite, buffer).constrained_max(z, beta).value;
  }
  return LinearDataSummary(dynamic_cast<const LinearClass&>(cls), buffer).constrained_max(z, beta, counts);
}

PlanResult planner_a(const FunctionClass& cls, const StepData& full_data,
                     const std::vector<WeightedSet>& buffers, double beta, int id) {
  return lsvi(cls, full_data, buffers, beta, Mode::Reward, nullptr, id);
}

PlanResult exploration_planner(const FunctionClass& cls, const StepData& full_data,
                               const std::vector<WeightedSet>& buffers, double beta, int id) {
  return lsvi(cls, full_data, buffers, beta, Mode::Exploration, nullptr, id);
}

PlanResult reward_free_plan(const FunctionClass& cls, const StepData& full_data,
                            const std::vector<WeightedSet>& buffers, const RewardTable& reward,
                            double beta, int id) {
  if (reward.horizon() != cls.horizon() || reward.num_states() != cls.num_states() ||
      reward.num_actions() != cls.num_actions()) {
    throw InvalidInput("reward table shape does not match the class");
  }
  reward.validate();
  return lsvi(cls, full_data, buffers, beta, Mode::Planning, &reward, id);
}

// ------------------------------------------------------------- confidence set

bool confidence_set_member(const FiniteClass& cls, const std::vector<std::size_t>& tuple,
                           const StepData& full_data, double beta) {
  check_shapes(cls, full_data, nullptr);
  const int H = cls.horizon();
  if (tuple.size() != static_cast<std::size_t>(H)) throw InvalidInput("tuple must hold H members");
  for (int h = 0; h < H; ++h) {
    const std::size_t i = tuple[static_cast<std::size_t>(h)];
    if (i >= cls.size()) throw InvalidInput("tuple member out of range");
    const auto table = cls.table(i);
    if (*std::max_element(table.begin(), table.end()) > H - h + 1e-12) return false;

    RegressionData data;
    for (const auto& st : full_data[static_cast<std::size_t>(h)]) {
      double next = 0.0;
      if (h + 1 < H) {
        const std::size_t j = tuple[static_cast<std::size_t>(h) + 1];
        for (int a = 0; a < cls.num_actions(); ++a) next = std::max(next, cls.value(j, st.next_state, a));
      }
      data.push_back({1.0, cls.point(st.state, st.action), st.reward + next});
    }
    const auto best = std::get<FiniteHandle>(cls.regress(data)).index;
    if (cls.loss(i, data) > cls.loss(best, data) + beta) return false;
  }
  return true;
}

namespace {

// Bellman regression losses L_h(g; f_next) for every member g, cached per
// (h, next) where next == size() stands for f_H == 0.
class BellmanLosses {
 public:
  BellmanLosses(const FiniteClass& cls, const StepData& full_data) : cls_(cls) {
    for (const auto& steps : full_data) cells_.push_back(aggregate(steps));
    const std::size_t n = cls.size();
    vmax_.assign(n * cls.num_states(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (int s = 0; s < cls.num_states(); ++s) {
        double v = 0.0;
        for (int a = 0; a < cls.num_actions(); ++a) v = std::max(v, cls.value(j, s, a));
        vmax_[j * cls.num_states() + s] = v;
      }
    }
  }

  std::size_t cells(int h) const { return cells_[static_cast<std::size_t>(h)].size(); }
  double vmax(std::size_t j, int s) const { return vmax_[j * cls_.num_states() + s]; }

  const std::vector<double>& losses(int h, std::size_t next) {
    auto key = std::make_pair(h, next);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<double> out(cls_.size(), 0.0);
    for (const auto& c : cells_[static_cast<std::size_t>(h)]) {
      const double y = c.reward + (next < cls_.size() ? vmax(next, c.next_state) : 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = cls_.value(i, c.state, c.action) - y;
        out[i] += c.count * r * r;
      }
    }
    return cache_.emplace(key, std::move(out)).first->second;
  }

  // Slack constraint at step h for member i followed by `next`.
  bool slack_ok(int h, std::size_t i, std::size_t next, double beta) {
    const auto& l = losses(h, next);
    return l[i] <= *std::min_element(l.begin(), l.end()) + beta;
  }

 private:
  const FiniteClass& cls_;
  std::vector<std::vector<Cell>> cells_;
  std::vector<double> vmax_;
  std::map<std::pair<int, std::size_t>, std::vector<double>> cache_;
};

}  // namespace

PlanResult planner_b(const FiniteClass& cls, const StepData& full_data, double beta,
                     int initial_state, int id, const ConfidenceSetConfig& config) {
  check_shapes(cls, full_data, nullptr);
  if (beta < 0.0) throw InvalidInput("confidence level must be nonnegative");
  const int H = cls.horizon();
  const std::size_t n = cls.size();
  const std::size_t none = n;  // stands for f_H == 0
  BellmanLosses bl(cls, full_data);

  std::vector<double> sup(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = cls.table(i);
    sup[i] = *std::max_element(t.begin(), t.end());
  }
  auto range_ok = [&](int h, std::size_t i) { return sup[i] <= H - h + 1e-12; };
  auto next_of = [&](int h, const std::vector<std::size_t>& t) {
    return h + 1 < H ? t[static_cast<std::size_t>(h) + 1] : none;
  };
  auto member = [&](const std::vector<std::size_t>& t) {
    for (int h = 0; h < H; ++h) {
      const std::size_t i = t[static_cast<std::size_t>(h)];
      if (!range_ok(h, i) || !bl.slack_ok(h, i, next_of(h, t), beta)) return false;
    }
    return true;
  };
  auto objective = [&](std::size_t i) { return std::min(bl.vmax(i, initial_state), static_cast<double>(H)); };

  std::vector<std::size_t> chosen;
  switch (config.mode) {
    case CandidateMode::Product: {
      double work = 0.0;
      for (int h = 0; h < H; ++h) work += static_cast<double>(n) * n * std::max<std::size_t>(bl.cells(h), 1);
      if (work > config.work_cap) throw CapacityError("confidence-set search exceeds the work cap");
      // feasible[h][i]: some completion f_{h+1}, ..., f_{H-1} keeps every
      // constraint from step h on.
      std::vector<std::vector<char>> feasible(static_cast<std::size_t>(H), std::vector<char>(n, 0));
      for (std::size_t i = 0; i < n; ++i) {
        feasible[H - 1][i] = range_ok(H - 1, i) && bl.slack_ok(H - 1, i, none, beta);
      }
      for (int h = H - 2; h >= 0; --h) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!range_ok(h, i)) continue;
          for (std::size_t j = 0; j < n && !feasible[h][i]; ++j) {
            feasible[h][i] = feasible[h + 1][j] && bl.slack_ok(h, i, j, beta);
          }
        }
      }
      std::size_t best = none;
      for (std::size_t i = 0; i < n; ++i) {
        if (feasible[0][i] && (best == none || objective(i) > objective(best))) best = i;
      }
      if (best == none) throw InfeasibleError("confidence set is empty");
      chosen.push_back(best);
      for (int h = 1; h < H; ++h) {
        for (std::size_t j = 0; j < n; ++j) {
          if (feasible[h][j] && bl.slack_ok(h - 1, chosen.back(), j, beta)) {
            chosen.push_back(j);
            break;
          }
        }
      }
      break;
    }
    case CandidateMode::Diagonal:
    case CandidateMode::List: {
      std::vector<std::vector<std::size_t>> candidates;
      if (config.mode == CandidateMode::Diagonal) {
        for (std::size_t i = 0; i < n; ++i) candidates.emplace_back(static_cast<std::size_t>(H), i);
      } else {
        candidates = config.candidates;
      }
      for (const auto& t : candidates) {
        if (t.size() != static_cast<std::size_t>(H)) throw InvalidInput("candidate tuples must hold H members");
        for (auto i : t) {
          if (i >= n) throw InvalidInput("candidate member out of range");
        }
        if (!member(t)) continue;
        if (chosen.empty() || objective(t[0]) > objective(chosen[0]) ||
            (objective(t[0]) == objective(chosen[0]) && t < chosen)) {
          chosen = t;
        }
      }
      if (chosen.empty()) throw InfeasibleError("no candidate lies in the confidence set");
      break;
    }
  }

  PlanResult out;
  out.counts.nested = 1;
  auto& est = out.estimate;
  const int S = cls.num_states();
  const int A = cls.num_actions();
  est.tuple = chosen;
  est.q = QTable(H, S, A);
  est.bonus.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  for (int h = 0; h < H; ++h) {
    const std::size_t i = chosen[static_cast<std::size_t>(h)];
    est.regressed.push_back(FiniteHandle{i});
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) est.q.at(h, s, a) = std::min(cls.value(i, s, a), static_cast<double>(H));
    }
    out.trace.push_back({id, h, bl.losses(h, next_of(h, chosen))[i], 0.0, 0.0, 0.0});
  }
  out.policy = GreedyPolicy(est.q, id);
  return out;
}

void write_planner_trace(std::ostream& out, const std::vector<PlannerTraceRow>& rows) {
  out << "pass,h,loss,bonus_min,bonus_mean,bonus_max\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", r.pass, r.h, r.loss,
                  r.bonus_min, r.bonus_mean, r.bonus_max);
    out << buf;
  }
}

}  // namespace rloss
