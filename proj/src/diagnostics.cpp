#include "rloss/diagnostics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "rloss/errors.hpp"

namespace rloss {

// ------------------------------------------------------------- eluder

int eluder_dimension_bruteforce(const FiniteClass& cls, const std::vector<StateAction>& pool,
                                double eps) {
  const std::size_t m = pool.size();
  if (m > static_cast<std::size_t>(kEluderPoolLimit)) {
    throw CapacityError("eluder search is limited to " + std::to_string(kEluderPoolLimit) + " points");
  }
  if (!(eps > 0.0)) throw InvalidInput("eps must be positive");
  const std::size_t n = cls.size();
  // gaps[p * m + j] = f_i(z_j) - f_k(z_j) for the p-th unordered pair.
  std::vector<double> gaps;
  std::set<double> levels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      for (const auto& z : pool) {
        const double g = std::abs(cls.value(i, z.state, z.action) - cls.value(k, z.state, z.action));
        gaps.push_back(g);
        if (g > eps) levels.insert(g);
      }
    }
  }
  const std::size_t pairs = m ? gaps.size() / m : 0;

  // For eps' ranging over [max(eps, g_prev), g), independence only gets
  // easier as eps' grows, so the supremum is reached as eps' -> g from
  // below: a pair is admissible when its squared norm is < g^2 and z is
  // independent when some admissible pair has a gap >= g at z.
  const std::size_t states = std::size_t{1} << m;
  // sums[mask * pairs + p]: squared norm of pair p on the points in mask.
  std::vector<double> sums(states * pairs, 0.0);
  for (std::size_t mask = 1; mask < states; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    const std::size_t j = static_cast<std::size_t>(std::countr_zero(low));
    for (std::size_t p = 0; p < pairs; ++p) {
      const double g = gaps[p * m + j];
      sums[mask * pairs + p] = sums[(mask ^ low) * pairs + p] + g * g;
    }
  }
  int best = 0;
  std::vector<int> memo(states);
  for (const double g : levels) {
    const double g2 = g * g;
    // Masks in decreasing order so supersets are solved first.
    for (std::size_t mask = states; mask-- > 0;) {
      int longest = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (mask >> j & 1) continue;
        bool independent = false;
        for (std::size_t p = 0; p < pairs && !independent; ++p) {
          independent = sums[mask * pairs + p] < g2 && gaps[p * m + j] >= g;
        }
        if (independent) longest = std::max(longest, 1 + memo[mask | (std::size_t{1} << j)]);
      }
      memo[mask] = longest;
    }
    best = std::max(best, memo[0]);
  }
  return best;
}

// ------------------------------------------------------------- distortion

bool distortion_pass(double full_norm, double sub_norm_capped, double beta) {
  if (full_norm > 100.0 * beta) {
    return full_norm / 10000.0 <= sub_norm_capped && sub_norm_capped <= 10000.0 * full_norm;
  }
  return sub_norm_capped <= 10000.0 * beta;
}

namespace {

std::vector<std::pair<FunctionHandle, FunctionHandle>> audit_pairs(const FunctionClass& cls,
                                                                   std::size_t count,
                                                                   std::uint64_t seed) {
  std::vector<std::pair<FunctionHandle, FunctionHandle>> out;
  Rng rng = make_rng(seed, 303);
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    const std::size_t n = finite->size();
    if (n * (n - 1) / 2 <= count) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) out.emplace_back(FiniteHandle{i}, FiniteHandle{k});
      }
      return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (out.size() < count) {
      const std::size_t i = pick(rng);
      const std::size_t k = pick(rng);
      if (i != k) out.emplace_back(FiniteHandle{i}, FiniteHandle{k});
    }
    return out;
  }
  const auto& linear = dynamic_cast<const LinearClass&>(cls);
  const int d = linear.dim();
  std::normal_distribution<double> normal;
  auto draw = [&] {
    Eigen::VectorXd w(d);
    for (int i = 0; i < d; ++i) w[i] = normal(rng);
    const double radius = linear.ball_bound() * std::pow(uniform01(rng), 1.0 / d);
    return LinearHandle{w * (radius / std::max(w.norm(), 1e-300))};
  };
  for (std::size_t p = 0; p < count; ++p) {
    auto a = draw();
    auto b = draw();
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

}  // namespace

DistortionReport distortion_audit(const FunctionClass& cls, const std::vector<Trajectory>& trajectories,
                                  const std::vector<SubDataset>& buffers, double beta,
                                  double total_steps, std::size_t pair_count, std::uint64_t seed) {
  const int H = cls.horizon();
  if (buffers.size() != static_cast<std::size_t>(H)) throw InvalidInput("one buffer per step required");
  for (const auto& t : trajectories) {
    if (t.steps.size() != static_cast<std::size_t>(H)) throw InvalidInput("trajectory length must be H");
  }
  DistortionReport rep;
  rep.beta = beta;
  rep.cap = total_steps * (H + 1.0) * (H + 1.0);
  const auto pairs = audit_pairs(cls, pair_count, seed);
  rep.pairs = pairs.size();
  const int K = static_cast<int>(trajectories.size());
  const int S = cls.num_states();
  const int A = cls.num_actions();

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [f1, f2] = pairs[p];
    std::vector<double> table(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto z = cls.point(s, a);
        const double g = cls.evaluate(f1, z) - cls.evaluate(f2, z);
        table[static_cast<std::size_t>(s) * A + a] = g * g;
      }
    }
    auto gap_sq = [&](const StateAction& z) {
      if (z.features.empty()) return table[static_cast<std::size_t>(z.state) * A + z.action];
      const double g = cls.evaluate(f1, z) - cls.evaluate(f2, z);
      return g * g;
    };
    for (int h = 0; h < H; ++h) {
      const auto& entries = buffers[static_cast<std::size_t>(h)].entries();
      double full = 0.0;
      double sub = 0.0;
      std::size_t next = 0;
      for (int k = 1; k <= K + 1; ++k) {
        if (k >= 2) {
          const Step& st = trajectories[static_cast<std::size_t>(k) - 2].steps[static_cast<std::size_t>(h)];
          full += table[static_cast<std::size_t>(st.state) * A + st.action];
        }
        while (next < entries.size() && entries[next].episode < k) {
          sub += static_cast<double>(entries[next].weight) * gap_sq(entries[next].point);
          ++next;
        }
        DistortionRow row{k, h, p, full, std::min(sub, rep.cap), full > 100.0 * beta, true};
        row.pass = distortion_pass(row.full_norm, row.sub_norm, beta);
        ++rep.checks;
        if (row.large) {
          ++rep.large_checks;
          const double ratio = row.sub_norm > 0.0 ? std::max(row.sub_norm / full, full / row.sub_norm)
                                                  : std::numeric_limits<double>::infinity();
          rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        }
        if (!row.pass) {
          ++rep.violations;
          if (rep.failures.size() < 100) rep.failures.push_back(row);
        }
      }
    }
  }
  return rep;
}

// ------------------------------------------------------------- optimism

OptimismReport optimism_audit(const std::vector<PlanningPass>& passes, const EpisodicMdp& env,
                              const RewardTable* reward) {
  const ValueTable star = exact_optimal_values(env, reward);
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  const int s1 = env.initial_state();
  double ok_cells = 0.0;
  double all_cells = 0.0;
  std::size_t ok_episodes = 0;
  std::size_t ok_values = 0;
  OptimismReport rep;
  for (const auto& pass : passes) {
    if (pass.q.horizon() != H || pass.q.num_states() != S || pass.q.num_actions() != A) {
      throw InvalidInput("planning pass lacks a Q table of the environment's shape");
    }
    std::size_t ok = 0;
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) ok += pass.q(h, s, a) >= star.q(h, s, a) - 1e-9;
      }
    }
    bool first = true;
    for (int a = 0; a < A; ++a) first = first && pass.q(0, s1, a) >= star.q(0, s1, a) - 1e-9;
    ok_cells += static_cast<double>(ok) * pass.active;
    all_cells += static_cast<double>(H) * S * A * pass.active;
    if (first) ok_episodes += static_cast<std::size_t>(pass.active);
    if (pass.q.value(0, s1) >= star.v(0, s1) - 1e-9) ok_values += static_cast<std::size_t>(pass.active);
    rep.episodes += static_cast<std::size_t>(pass.active);
  }
  if (rep.episodes > 0) {
    rep.fraction = ok_cells / all_cells;
    rep.episode_fraction = static_cast<double>(ok_episodes) / static_cast<double>(rep.episodes);
    rep.value_fraction = static_cast<double>(ok_values) / static_cast<double>(rep.episodes);
  }
  return rep;
}

std::vector<CoverSizeRow> cover_size_report(const FunctionClass& cls, const std::vector<double>& eps) {
  std::vector<CoverSizeRow> out;
  for (const double e : eps) {
    if (!(e > 0.0)) throw InvalidInput("cover resolution must be positive");
    const double log_size = cls.log_cover_size(e);
    const std::size_t size = log_size <= std::log(kCoverEnumerateLimit) ? cls.cover(e).size() : 0;
    out.push_back({e, log_size, size});
  }
  return out;
}

// ------------------------------------------------------------- artifacts

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

int to_int(const std::string& s, int line) {
  const double v = to_double(s, line);
  if (v != std::floor(v)) throw InvalidInput("line " + std::to_string(line) + ": expected an integer");
  return static_cast<int>(v);
}

}  // namespace

void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << "episode,h,state,action,reward,next_state\n";
  char buf[64];
  for (const auto& t : trajectories) {
    for (std::size_t h = 0; h < t.steps.size(); ++h) {
      const Step& st = t.steps[h];
      std::snprintf(buf, sizeof buf, "%.17g", st.reward);
      out << t.episode << ',' << h << ',' << st.state << ',' << st.action << ',' << buf << ','
          << st.next_state << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories_csv(std::istream& in, int horizon) {
  std::vector<Trajectory> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "episode,h,state,action,reward,next_state") throw InvalidInput("trajectories: bad header");
      continue;
    }
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6) throw InvalidInput("line " + std::to_string(line_no) + ": expected 6 columns");
    const int episode = to_int(c[0], line_no);
    const int h = to_int(c[1], line_no);
    if (h == 0) out.push_back({episode, {}});
    if (out.empty() || out.back().episode != episode || static_cast<int>(out.back().steps.size()) != h) {
      throw InvalidInput("line " + std::to_string(line_no) + ": steps out of order");
    }
    out.back().steps.push_back({to_int(c[2], line_no), to_int(c[3], line_no), to_double(c[4], line_no),
                                to_int(c[5], line_no)});
  }
  for (const auto& t : out) {
    if (static_cast<int>(t.steps.size()) != horizon) throw InvalidInput("trajectory length must be H");
  }
  return out;
}

StepData step_data(const std::vector<Trajectory>& trajectories, int horizon) {
  StepData data(static_cast<std::size_t>(horizon));
  for (const auto& t : trajectories) {
    for (int h = 0; h < horizon; ++h) data[static_cast<std::size_t>(h)].push_back(t.steps.at(static_cast<std::size_t>(h)));
  }
  return data;
}

void write_qtables_csv(std::ostream& out, const std::vector<PlanningPass>& passes) {
  out << "episode,active,switched,h,s,a,q\n";
  char buf[64];
  for (const auto& p : passes) {
    for (int h = 0; h < p.q.horizon(); ++h) {
      for (int s = 0; s < p.q.num_states(); ++s) {
        for (int a = 0; a < p.q.num_actions(); ++a) {
          std::snprintf(buf, sizeof buf, "%.17g", p.q(h, s, a));
          out << p.episode << ',' << p.active << ',' << int(p.switched) << ',' << h << ',' << s << ','
              << a << ',' << buf << '\n';
        }
      }
    }
  }
}

std::vector<PlanningPass> read_qtables_csv(std::istream& in, int horizon, int num_states,
                                           int num_actions) {
  std::vector<PlanningPass> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "episode,active,switched,h,s,a,q") throw InvalidInput("q tables: bad header");
      continue;
    }
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw InvalidInput("line " + std::to_string(line_no) + ": expected 7 columns");
    const int episode = to_int(c[0], line_no);
    if (out.empty() || out.back().episode != episode) {
      PlanningPass p;
      p.episode = episode;
      p.active = to_int(c[1], line_no);
      p.switched = to_int(c[2], line_no) != 0;
      p.q = QTable(horizon, num_states, num_actions);
      out.push_back(std::move(p));
    }
    const int h = to_int(c[3], line_no);
    const int s = to_int(c[4], line_no);
    const int a = to_int(c[5], line_no);
    if (h < 0 || h >= horizon || s < 0 || s >= num_states || a < 0 || a >= num_actions) {
      throw InvalidInput("line " + std::to_string(line_no) + ": index out of range");
    }
    out.back().q.at(h, s, a) = to_double(c[6], line_no);
  }
  return out;
}

}  // namespace rloss
