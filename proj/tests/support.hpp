#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "rloss/env.hpp"
#include "rloss/funclass.hpp"
#include "rloss/rng.hpp"

namespace testing_support {

// Random finite class over S x A with `n` functions, entries in [0, top].
inline std::unique_ptr<rloss::FiniteClass> random_finite(std::uint64_t seed, int n, int S, int A, int H,
                                                         double top = 2.0) {
  rloss::Rng rng = rloss::make_rng(seed, 77);
  std::vector<std::vector<double>> tables(n, std::vector<double>(static_cast<std::size_t>(S) * A));
  for (auto& t : tables) {
    for (auto& v : t) v = top * rloss::uniform01(rng);
  }
  return std::make_unique<rloss::FiniteClass>(std::move(tables), S, A, H);
}

// Plain weighted squared distance between two tables, no library code.
inline double table_norm_sq(const rloss::FiniteClass& cls, std::size_t i, std::size_t j,
                            const rloss::WeightedSet& data) {
  double acc = 0.0;
  for (const auto& wp : data) {
    const double g = cls.value(i, wp.point.state, wp.point.action) - cls.value(j, wp.point.state, wp.point.action);
    acc += wp.weight * g * g;
  }
  return acc;
}

inline double sigma_binomial(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace testing_support
