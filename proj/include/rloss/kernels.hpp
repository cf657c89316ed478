#pragma once

// Data-parallel inner loops over pairs of finite-class members. Each kernel
// has a serial reference (`*_serial`) that the tests compare against and an
// OpenMP version used by the library. Both break ties identically, so they
// return bitwise-equal results.

#include <cstddef>
#include <span>
#include <vector>

namespace rloss::kernels {

// `values` is row-major n x m (member i evaluated at support point j) and
// `weights` has length m. Writes the n x n matrix of
// sum_j w_j (v_ij - v_kj)^2 into `out`.
void pairwise_sq_distances_serial(std::span<const double> values, std::size_t n, std::size_t m,
                                  std::span<const double> weights, std::span<double> out);
void pairwise_sq_distances(std::span<const double> values, std::size_t n, std::size_t m,
                           std::span<const double> weights, std::span<double> out);

struct PairMax {
  double value = 0.0;
  std::size_t first = 0;
  std::size_t second = 0;
  double norm_sq = 0.0;
};

// max over ordered pairs (i, k) with dist(i, k) <= radius of at_z[i] - at_z[k].
// The diagonal is always feasible, so the result is >= 0. Ties go to the
// lexicographically smallest (i, k).
PairMax constrained_pair_max_serial(std::span<const double> at_z, std::span<const double> dist,
                                    double radius);
PairMax constrained_pair_max(std::span<const double> at_z, std::span<const double> dist,
                             double radius);

// min{ max_{i,k} (at_z[i] - at_z[k])^2 / (min{dist(i,k), cap} + beta), 1 }.
double sensitivity_sup_serial(std::span<const double> at_z, std::span<const double> dist,
                              double cap, double beta);
double sensitivity_sup(std::span<const double> at_z, std::span<const double> dist, double cap,
                       double beta);

}  // namespace rloss::kernels
