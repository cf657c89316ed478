#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "rloss/errors.hpp"
#include "rloss/optimizer.hpp"
#include "support.hpp"

using namespace rloss;

namespace {

double pair_max_oracle(const FiniteClass& cls, const WeightedSet& data, const StateAction& z, double beta) {
  double best = 0.0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    for (std::size_t j = 0; j < cls.size(); ++j) {
      if (testing_support::table_norm_sq(cls, i, j, data) > beta) continue;
      best = std::max(best, cls.value(i, z.state, z.action) - cls.value(j, z.state, z.action));
    }
  }
  return best;
}

double sensitivity_oracle(const FiniteClass& cls, const WeightedSet& data, const StateAction& z, double beta,
                          double total_steps) {
  const double cap = total_steps * (cls.horizon() + 1.0) * (cls.horizon() + 1.0);
  double best = 0.0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    for (std::size_t j = 0; j < cls.size(); ++j) {
      const double g = cls.value(i, z.state, z.action) - cls.value(j, z.state, z.action);
      best = std::max(best, g * g / (std::min(testing_support::table_norm_sq(cls, i, j, data), cap) + beta));
    }
  }
  return std::min(best, 1.0);
}

WeightedSet sample_points(Rng& rng, int S, int A, int n) {
  WeightedSet data;
  for (int i = 0; i < n; ++i) {
    data.push_back({StateAction{static_cast<int>(rng() % S), static_cast<int>(rng() % A), {}},
                    1.0 + static_cast<double>(rng() % 3)});
  }
  return data;
}

}  // namespace

TEST_CASE("bisection with no data reaches the unconstrained sup") {
  Eigen::MatrixXd phi(2, 2);
  phi << 0.6, 0.8, 1.0, 3.0;
  LinearClass cls(phi, 2, 1, 4, 0.5);
  const WeightedSet empty;
  const double alpha = 1e-4;
  // 2 B ||phi|| = 1 for the first point, capped at 2 (H + 1) = 10 never.
  auto res = constrained_max_bisect(cls, ConstrainedMaxProblem{&empty, cls.point(0, 0), 4.0, alpha});
  CHECK(std::abs(res.value - 1.0) <= alpha);
  res = constrained_max_bisect(cls, ConstrainedMaxProblem{&empty, cls.point(1, 0), 4.0, alpha});
  CHECK(std::abs(res.value - std::sqrt(10.0)) <= alpha);

  LinearClass wide(phi, 2, 1, 1, 10.0);
  res = constrained_max_bisect(wide, ConstrainedMaxProblem{&empty, wide.point(1, 0), 4.0, alpha});
  CHECK(std::abs(std::min(res.value, wide.gap_ceiling()) - 4.0) <= alpha);
}

TEST_CASE("bisection with an inactive constraint") {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(3, 3);
  LinearClass cls(phi, 3, 1, 4, 0.7);
  const WeightedSet data{{cls.point(0, 0), 2.0}, {cls.point(1, 0), 1.0}};
  const double alpha = 1e-3;
  const auto res = constrained_max_bisect(cls, ConstrainedMaxProblem{&data, cls.point(0, 0), 1e9, alpha});
  CHECK(std::abs(res.value - 1.4) <= alpha);
  CHECK(res.oracle_calls <= std::ceil(std::log2(res.w_high / res.w_gap)) + 5);
}

TEST_CASE("bisection on a one-hot cell follows the closed form") {
  // One cell seen with weight n: the gap u satisfies n u^2 <= beta, so the
  // sup is sqrt(beta / n) unless the ball binds first.
  auto cls = make_onehot_class(2, 2, 3, 5.0);
  for (double n : {1.0, 4.0, 25.0}) {
    const WeightedSet data{{cls->point(1, 1), n}};
    const double beta = 2.0;
    const auto res =
        constrained_max_bisect(*cls, ConstrainedMaxProblem{&data, cls->point(1, 1), beta, 1e-6});
    CHECK(std::abs(res.value - std::sqrt(beta / n)) <= 1e-6);
    CHECK(res.feasible_norm_sq <= beta * (1.0 + 1e-9) + 1e-9);
  }
}

TEST_CASE("finite enumeration") {
  FiniteClass single({{1.0, 2.0}}, 1, 2, 3);
  const WeightedSet empty;
  CHECK(constrained_max_enumerate(single, {&empty, single.point(0, 1), 1.0, 0.0}).value == 0.0);

  FiniteClass two({{0.0, 0.0}, {2.0, 2.0}}, 1, 2, 3);
  const WeightedSet data{{two.point(0, 0), 1.0}};
  CHECK(constrained_max_enumerate(two, {&data, two.point(0, 1), 1.0, 0.0}).value == 0.0);
  CHECK(constrained_max_enumerate(two, {&data, two.point(0, 1), 4.0, 0.0}).value == 2.0);

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cls = testing_support::random_finite(seed, 5, 3, 2, 3);
    Rng rng = make_rng(seed, 5);
    const auto d = sample_points(rng, 3, 2, 6);
    const StateAction z{static_cast<int>(seed % 3), static_cast<int>(seed % 2), {}};
    for (double beta : {0.5, 2.0, 8.0}) {
      const ConstrainedMaxProblem prob{&d, z, beta, 0.0};
      const double expect = pair_max_oracle(*cls, d, z, beta);
      CHECK(constrained_max_enumerate(*cls, prob).value == doctest::Approx(expect));
      CHECK(constrained_max(*cls, prob) == doctest::Approx(expect));
    }
  }
}

TEST_CASE("finite sensitivity: exact versus estimate") {
  auto single = testing_support::random_finite(1, 1, 2, 2, 3);
  CHECK(estimate_sensitivity(*single, {}, single->point(0, 0), 1.0, 100.0) == 0.0);
  CHECK(exact_sensitivity(*single, {}, single->point(0, 0), 1.0, 100.0) == 0.0);

  FiniteClass two({{0.0}, {0.8}}, 1, 1, 2);
  for (double beta : {1.0, 3.0}) {
    const double exact = exact_sensitivity(two, {}, two.point(0, 0), beta, 50.0);
    CHECK(exact == doctest::Approx(std::min(0.64 / beta, 1.0)));
    const double est = estimate_sensitivity(two, {}, two.point(0, 0), beta, 50.0);
    CHECK(est <= exact * (1.0 + 1e-12));
    CHECK(2.0 * est >= exact * (1.0 - 1e-12));
  }

  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto cls = testing_support::random_finite(seed, 6, 3, 2, 3, 4.0);
    Rng rng = make_rng(seed, 9);
    const auto d = sample_points(rng, 3, 2, static_cast<int>(seed % 8));
    const StateAction z{static_cast<int>(rng() % 3), static_cast<int>(rng() % 2), {}};
    const double exact = exact_sensitivity(*cls, d, z, 1.0, 200.0);
    CHECK(exact == doctest::Approx(sensitivity_oracle(*cls, d, z, 1.0, 200.0)));
    OracleCounts counts;
    const double est = estimate_sensitivity(*cls, d, z, 1.0, 200.0, &counts);
    CHECK(counts.small == dyadic_levels(200.0, 3) + 1);
    if (exact > 0.0) {
      CHECK(exact / est >= 1.0 - 1e-12);
      CHECK(exact / est <= 2.0 + 1e-12);
    }
  }
  CHECK_THROWS_AS(estimate_sensitivity(two, {}, two.point(0, 0), 0.5, 10.0), InvalidInput);
}

TEST_CASE("linear sensitivity estimate stays in [0, 1]") {
  auto cls = make_onehot_class(3, 2, 3);
  Rng rng = make_rng(3, 3);
  WeightedSet d;
  for (int i = 0; i < 30; ++i) {
    const StateAction z{static_cast<int>(rng() % 3), static_cast<int>(rng() % 2), {}};
    const double s = estimate_sensitivity(*cls, d, z, 1.0, 400.0);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    d.push_back({z, 1.0});
  }
  // A heavily observed cell has a small score.
  const WeightedSet heavy{{cls->point(0, 0), 1000.0}};
  CHECK(estimate_sensitivity(*cls, heavy, cls->point(0, 0), 1.0, 400.0) < 0.05);
}

TEST_CASE("dyadic levels") {
  // T (H + 1)^2 = 100 * 16 = 1600, ceil(log2 1600) = 11, plus the zero level.
  CHECK(dyadic_levels(100.0, 3) == 12);
  CHECK(dyadic_levels(1.0, 0) == 1);
}
