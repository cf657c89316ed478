#include "rloss/kernels.hpp"

#include <algorithm>
#include <limits>

#include <omp.h>

namespace rloss::kernels {

void pairwise_sq_distances_serial(std::span<const double> values, std::size_t n, std::size_t m,
                                  std::span<const double> weights, std::span<double> out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 0.0;
    for (std::size_t k = i + 1; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double gap = values[i * m + j] - values[k * m + j];
        acc += weights[j] * gap * gap;
      }
      out[i * n + k] = acc;
      out[k * n + i] = acc;
    }
  }
}

void pairwise_sq_distances(std::span<const double> values, std::size_t n, std::size_t m,
                           std::span<const double> weights, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4) if (n * n * m > 4096)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    out[i * n + i] = 0.0;
    for (std::size_t k = i + 1; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double gap = values[i * m + j] - values[k * m + j];
        acc += weights[j] * gap * gap;
      }
      out[i * n + k] = acc;
      out[k * n + i] = acc;
    }
  }
}

namespace {

// Strictly better: larger value, then smaller (first, second).
bool better(const PairMax& a, const PairMax& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

PairMax scan_rows(std::span<const double> at_z, std::span<const double> dist, double radius,
                  std::size_t begin, std::size_t end) {
  const std::size_t n = at_z.size();
  PairMax best{-std::numeric_limits<double>::infinity(), n, n, 0.0};
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double d = dist[i * n + k];
      if (d > radius) continue;
      PairMax cand{at_z[i] - at_z[k], i, k, d};
      if (better(cand, best)) best = cand;
    }
  }
  return best;
}

}  // namespace

PairMax constrained_pair_max_serial(std::span<const double> at_z, std::span<const double> dist,
                                    double radius) {
  return scan_rows(at_z, dist, std::max(radius, 0.0), 0, at_z.size());
}

PairMax constrained_pair_max(std::span<const double> at_z, std::span<const double> dist,
                             double radius) {
  const std::size_t n = at_z.size();
  radius = std::max(radius, 0.0);
  PairMax best{-std::numeric_limits<double>::infinity(), n, n, 0.0};
  if (n * n < 4096) return scan_rows(at_z, dist, radius, 0, n);
#pragma omp parallel
  {
    PairMax local{-std::numeric_limits<double>::infinity(), n, n, 0.0};
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const PairMax row = scan_rows(at_z, dist, radius, static_cast<std::size_t>(i),
                                    static_cast<std::size_t>(i) + 1);
      if (better(row, local)) local = row;
    }
#pragma omp critical(rloss_pair_max)
    if (better(local, best)) best = local;
  }
  return best;
}

double sensitivity_sup_serial(std::span<const double> at_z, std::span<const double> dist,
                              double cap, double beta) {
  const std::size_t n = at_z.size();
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double gap = at_z[i] - at_z[k];
      best = std::max(best, gap * gap / (std::min(dist[i * n + k], cap) + beta));
    }
  }
  return std::min(best, 1.0);
}

double sensitivity_sup(std::span<const double> at_z, std::span<const double> dist, double cap,
                       double beta) {
  const auto n = static_cast<std::ptrdiff_t>(at_z.size());
  double best = 0.0;
#pragma omp parallel for reduction(max : best) schedule(dynamic, 4) if (n * n > 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t k = i + 1; k < n; ++k) {
      const double gap = at_z[i] - at_z[k];
      best = std::max(best, gap * gap / (std::min(dist[i * n + k], cap) + beta));
    }
  }
  return std::min(best, 1.0);
}

}  // namespace rloss::kernels
