#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rloss/driver.hpp"
#include "rloss/env.hpp"
#include "rloss/funclass.hpp"
#include "rloss/subsampler.hpp"

namespace rloss {

inline constexpr int kEluderPoolLimit = 12;

// Longest sequence from `pool` in which, for one eps' >= eps, every element
// is eps'-independent of its predecessors. Exhaustive over subsets; the pool
// may hold at most kEluderPoolLimit points.
int eluder_dimension_bruteforce(const FiniteClass& cls, const std::vector<StateAction>& pool,
                                double eps);

// One checked (pair, k, h). `sub_norm` is already capped at T (H + 1)^2.
struct DistortionRow {
  int k = 0;
  int h = 0;
  std::size_t pair = 0;
  double full_norm = 0.0;
  double sub_norm = 0.0;
  bool large = false;  // full_norm > 100 beta
  bool pass = true;
};

struct DistortionReport {
  double beta = 0.0;
  double cap = 0.0;
  std::size_t pairs = 0;
  std::size_t checks = 0;
  std::size_t large_checks = 0;
  std::size_t violations = 0;
  double worst_ratio = 1.0;             // max over large checks of max(sub/full, full/sub)
  std::vector<DistortionRow> failures;  // first few violations
  double violation_rate() const { return checks ? static_cast<double>(violations) / checks : 0.0; }
};

// (1/10000) full <= min(sub, cap) <= 10000 full when full > 100 beta,
// otherwise min(sub, cap) <= 10000 beta.
bool distortion_pass(double full_norm, double sub_norm_capped, double beta);

// Checks every prefix k = 1 .. K + 1 and step h: the full data holds the
// first k - 1 trajectories and the buffer the entries sampled from them.
// Finite classes enumerate pairs (sampled when there are more than
// `pair_count`); linear classes draw weight pairs uniformly from the ball.
DistortionReport distortion_audit(const FunctionClass& cls, const std::vector<Trajectory>& trajectories,
                                  const std::vector<SubDataset>& buffers, double beta,
                                  double total_steps, std::size_t pair_count, std::uint64_t seed);

struct OptimismReport {
  double fraction = 1.0;          // over (k, h, s, a)
  double episode_fraction = 1.0;  // episodes with Q_1(s1, a) >= Q*_1(s1, a) for all a
  double value_fraction = 1.0;    // episodes with max_a Q_1(s1, a) >= V*_1(s1)
  std::size_t episodes = 0;
};

// Each planning pass counts once per episode it was deployed for.
OptimismReport optimism_audit(const std::vector<PlanningPass>& passes, const EpisodicMdp& env,
                              const RewardTable* reward = nullptr);

struct CoverSizeRow {
  double eps = 0.0;
  double log_size = 0.0;
  std::size_t size = 0;  // enumerated size; 0 when the cover is too large to build
};

inline constexpr double kCoverEnumerateLimit = 1e6;

std::vector<CoverSizeRow> cover_size_report(const FunctionClass& cls, const std::vector<double>& eps);

// Artifact files.
void write_trajectories_csv(std::ostream& out, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories_csv(std::istream& in, int horizon);
StepData step_data(const std::vector<Trajectory>& trajectories, int horizon);

void write_qtables_csv(std::ostream& out, const std::vector<PlanningPass>& passes);
std::vector<PlanningPass> read_qtables_csv(std::istream& in, int horizon, int num_states,
                                           int num_actions);

}  // namespace rloss
