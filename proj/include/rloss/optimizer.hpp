#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rloss/funclass.hpp"
#include "rloss/kernels.hpp"

namespace rloss {

struct OracleCounts {
  std::int64_t big = 0;     // regressions on the full dataset
  std::int64_t small = 0;   // regressions on a sub-sampled dataset
  std::int64_t nested = 0;  // confidence-set optimizations

  OracleCounts& operator+=(const OracleCounts& o) {
    big += o.big;
    small += o.small;
    nested += o.nested;
    return *this;
  }
};

// max f1(z) - f2(z) subject to ||f1 - f2||^2_data <= beta.
struct ConstrainedMaxProblem {
  const WeightedSet* data = nullptr;
  StateAction point;
  double beta = 1.0;
  double alpha = 0.0;  // <= 0 selects the default precision
};

double default_precision(double beta);

struct BisectionTrace {
  int iteration = 0;
  double w = 0.0;
  double z = 0.0;
  double norm_sq = 0.0;
};

struct BisectionResult {
  double value = 0.0;  // z_H
  Eigen::VectorXd direction;  // g_H as a weight vector over F - F
  double norm_sq = 0.0;  // ||g_H||^2 on the data
  double feasible_value = 0.0;  // z_L
  Eigen::VectorXd feasible_direction;
  double feasible_norm_sq = 0.0;
  int oracle_calls = 0;
  int iterations = 0;
  double w_high = 0.0;  // initial w_H
  double w_gap = 0.0;   // termination gap Delta
};

// Lagrangian bisection over the weight w of the penalty
// (w / 2) (g(z) - 2 (H + 1))^2. Each step is one regression-oracle call over
// G = F - F (ball radius 2B). Requires beta > 0.
BisectionResult constrained_max_bisect(const LinearClass& cls, const ConstrainedMaxProblem& problem,
                                       std::vector<BisectionTrace>* trace = nullptr);
// Same, with the data summarized by its Gram matrix.
BisectionResult constrained_max_bisect(const LinearClass& cls, const Eigen::MatrixXd& data_gram,
                                       const StateAction& z, double beta, double alpha,
                                       std::vector<BisectionTrace>* trace = nullptr);

// Exact answer for finite classes by pair enumeration.
kernels::PairMax constrained_max_enumerate(const FiniteClass& cls, const ConstrainedMaxProblem& problem);

// Pairwise ||f_i - f_k||^2 over a weighted set for every pair of members,
// reusable across query points.
class FinitePairNorms {
 public:
  FinitePairNorms(const FiniteClass& cls, const WeightedSet& data);

  const FiniteClass& cls() const { return *cls_; }
  std::span<const double> distances() const { return dist_; }
  std::vector<double> at(const StateAction& z) const;

  kernels::PairMax constrained_max(const StateAction& z, double beta) const;
  // Sensitivity sup by exhaustive pairs.
  double sensitivity(const StateAction& z, double beta, double cap) const;

 private:
  const FiniteClass* cls_;
  std::vector<double> dist_;
};

// Gram-matrix cache of a weighted set for linear classes.
class LinearDataSummary {
 public:
  LinearDataSummary(const LinearClass& cls, const WeightedSet& data);

  const LinearClass& cls() const { return *cls_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  // Constrained max value (beta > 0 by bisection, beta == 0 on the null
  // space of the data), capped at the class gap ceiling.
  double constrained_max(const StateAction& z, double beta, OracleCounts* counts,
                         std::vector<BisectionTrace>* trace = nullptr) const;

 private:
  const LinearClass* cls_;
  Eigen::MatrixXd gram_;
};

// Dispatches to bisection (linear) or enumeration (finite).
double constrained_max(const FunctionClass& cls, const ConstrainedMaxProblem& problem,
                       OracleCounts* counts = nullptr);

// Number of dyadic radii 2^0 .. 2^J with 2^J >= T (H + 1)^2.
int dyadic_levels(double total_steps, int horizon);

// Two-approximate sensitivity: solve the constrained problem at radii
// 2^0, 2^1, ..., 2^J and +infinity and keep the best ratio. Requires beta >= 1.
double estimate_sensitivity(const FunctionClass& cls, const WeightedSet& data,
                            const StateAction& z, double beta, double total_steps,
                            OracleCounts* counts = nullptr);

// Exact sensitivity by pair enumeration (finite classes).
double exact_sensitivity(const FiniteClass& cls, const WeightedSet& data, const StateAction& z,
                         double beta, double total_steps);

}  // namespace rloss
