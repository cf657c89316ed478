#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rloss/env.hpp"
#include "rloss/errors.hpp"
#include "support.hpp"

using namespace rloss;

namespace {

// Backward induction written out independently of the library DP.
double brute_force_best(const EpisodicMdp& env) {
  const int S = env.num_states(), A = env.num_actions(), H = env.horizon();
  const int cells = H * S;
  long total = 1;
  for (int i = 0; i < cells; ++i) total *= A;
  double best = -1.0;
  std::vector<int> pol(cells);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < cells; ++i) {
      pol[i] = static_cast<int>(c % A);
      c /= A;
    }
    // Forward state distribution.
    std::vector<double> dist(S, 0.0);
    dist[env.initial_state()] = 1.0;
    double value = 0.0;
    for (int h = 0; h < H; ++h) {
      std::vector<double> next(S, 0.0);
      for (int s = 0; s < S; ++s) {
        if (dist[s] == 0.0) continue;
        const int a = pol[h * S + s];
        value += dist[s] * env.reward(h, s, a);
        const auto row = env.transition_row(h, s, a);
        for (int t = 0; t < S; ++t) next[t] += dist[s] * row[t];
      }
      dist = next;
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace

TEST_CASE("reset returns the configured initial state") {
  CHECK(make_chain(8, 6).reset() == 0);
  const auto tab = make_tabular_random(7, 5, 3, 4);
  CHECK(tab.reset() == tab.initial_state());
  const auto lin = make_linear_mdp(3, 3, 6, 2, 3);
  CHECK(lin.reset() == lin.initial_state());
}

TEST_CASE("chain steps are deterministic") {
  const auto env = make_chain(8, 6);
  Rng rng = make_rng(1, 1);
  int s = 0;
  for (int h = 0; h < 6; ++h) {
    auto [r, next] = env.step(rng, h, s, chain_correct_action(s));
    CHECK(next == s + 1);
    CHECK(r == (s == 5 ? 1.0 : 0.0));
    s = next;
  }
  CHECK(*env.goal_state() == 6);
  auto [r, next] = env.step(rng, 0, 0, 1 - chain_correct_action(0));
  CHECK(r == 0.0);
  CHECK(next == 7);
}

TEST_CASE("tabular next-state frequencies match the stored kernel") {
  const auto env = make_tabular_random(11, 5, 3, 4);
  Rng rng = make_rng(5, 1);
  const int n = 100000;
  std::vector<int> hits(5, 0);
  for (int i = 0; i < n; ++i) ++hits[env.sample_next(rng, 2, 1, 2)];
  const auto row = env.transition_row(2, 1, 2);
  for (int t = 0; t < 5; ++t) {
    const double sd = testing_support::sigma_binomial(row[t], n);
    CHECK(std::abs(hits[t] / double(n) - row[t]) <= 3.0 * sd + 1e-12);
  }
}

TEST_CASE("generated environments are valid and reproducible") {
  for (std::uint64_t seed : {1u, 2u, 9u}) {
    const auto a = make_tabular_random(seed, 5, 3, 4);
    const auto b = make_tabular_random(seed, 5, 3, 4);
    CHECK(dump_text(a) == dump_text(b));
    for (int h = 0; h < 4; ++h) {
      for (int s = 0; s < 5; ++s) {
        for (int act = 0; act < 3; ++act) {
          double sum = 0.0;
          for (double p : a.transition_row(h, s, act)) sum += p;
          CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
          CHECK(a.reward(h, s, act) >= 0.0);
          CHECK(a.reward(h, s, act) <= 1.0);
        }
      }
    }
    const auto star = exact_optimal_values(a);
    CHECK(star.v(0, a.initial_state()) >= 0.0);
    CHECK(star.v(0, a.initial_state()) <= 4.0);
  }
  CHECK(dump_text(make_tabular_random(1, 5, 3, 4)) != dump_text(make_tabular_random(2, 5, 3, 4)));
}

TEST_CASE("linear MDP backups stay in the feature span") {
  const int d = 3, S = 6, A = 2, H = 3;
  const auto env = make_linear_mdp(4, d, S, A, H);
  const auto again = make_linear_mdp(4, d, S, A, H);
  REQUIRE(env.features());
  CHECK(env.features()->isApprox(*again.features(), 0.0));
  const Eigen::MatrixXd& phi = *env.features();
  REQUIRE(phi.rows() == S * A);
  Rng rng = make_rng(8, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd v(S);
    for (int s = 0; s < S; ++s) v[s] = 3.0 * uniform01(rng);
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd y(S * A);
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const auto row = env.transition_row(h, s, a);
          double acc = env.reward(h, s, a);
          for (int t = 0; t < S; ++t) acc += row[t] * v[t];
          y[s * A + a] = acc;
        }
      }
      const Eigen::VectorXd w = phi.colPivHouseholderQr().solve(y);
      CHECK((phi * w - y).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("chain values") {
  const auto env = make_chain(8, 6);
  const auto star = exact_optimal_values(env);
  CHECK(star.v(0, 0) == 1.0);
  std::vector<int> zero_policy(8 * env.num_states(), 0);
  CHECK(policy_values(env, zero_policy).v(0, 0) == 0.0);
  // Construction: advancing from s at step h pays iff the goal is still reachable.
  for (int h = 0; h < 8; ++h) {
    for (int s = 0; s < 6; ++s) {
      const double expected = (6 - s) <= (8 - h) ? 1.0 : 0.0;
      CHECK(star.v(h, s) == expected);
      CHECK(star.q(h, s, 1 - chain_correct_action(s)) == 0.0);
    }
  }
}

TEST_CASE("single-step optimal Q equals the reward") {
  const auto env = make_tabular_random(3, 4, 3, 1);
  const auto star = exact_optimal_values(env);
  for (int s = 0; s < 4; ++s) {
    for (int a = 0; a < 3; ++a) CHECK(star.q(0, s, a) == env.reward(0, s, a));
  }
}

TEST_CASE("optimal value matches enumeration over all policies") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto env = make_tabular_random(seed, 2, 2, 2);
    CHECK(exact_optimal_values(env).v(0, env.initial_state()) ==
          doctest::Approx(brute_force_best(env)).epsilon(1e-12));
  }
  const auto env = make_tabular_random(21, 3, 2, 3);
  CHECK(exact_optimal_values(env).v(0, env.initial_state()) ==
        doctest::Approx(brute_force_best(env)).epsilon(1e-12));
}

TEST_CASE("text round trip") {
  const auto env = make_linear_mdp(2, 2, 4, 2, 3);
  const auto back = parse_text(dump_text(env));
  CHECK(dump_text(back) == dump_text(env));
  const auto chain = make_chain(5, 3);
  const auto chain_back = parse_text(dump_text(chain));
  CHECK(chain_back.goal_state() == chain.goal_state());
}

TEST_CASE("invalid input is rejected") {
  CHECK_THROWS_AS(make_chain(3, 5), InvalidInput);
  CHECK_THROWS_AS(make_tabular_random(1, 0, 3, 4), Error);
  const auto env = make_chain(4, 2);
  Rng rng = make_rng(1, 1);
  CHECK_THROWS(env.step(rng, 4, 0, 0));
  CHECK_THROWS(env.step(rng, 0, 0, 7));
  CHECK_THROWS_AS(parse_text("garbage"), Error);
}
