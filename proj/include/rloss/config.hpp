#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rloss/driver.hpp"
#include "rloss/errors.hpp"

namespace rloss {

// Parse or validation failure tied to a spec line (0 when not line-bound).
class SpecError : public InvalidInput {
 public:
  SpecError(int line, const std::string& field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  std::string field_;
  std::string detail_;
};

struct EnvSpec {
  std::string kind = "tabular";  // tabular | linear | chain | file
  std::uint64_t seed = 1;
  int states = 5;
  int actions = 3;
  int horizon = 4;
  int dim = 3;
  int length = 6;
  std::string path;
};

struct ClassSpec {
  std::string kind = "onehot";  // onehot | linear | finite | qstar
  double ball = -1.0;
  double ridge = 1e-8;
  std::string path;
  int distractors = 4;
  std::uint64_t seed = 1;
};

struct SweepSpec {
  std::vector<int> episodes;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> presets;

  bool empty() const { return episodes.empty() && seeds.empty() && presets.empty(); }
};

// Sectioned key = value text:
//
//   [experiment]  name, output
//   [env]         kind, seed, states, actions, horizon, dim, length, path
//   [class]       kind, ball, ridge, path, distractors, seed
//   [run]         episodes, delta, planner, beta_mode, beta, beta_constant, zeta,
//                 preset, sampler_beta, sampler_constant, sampler_log_factor,
//                 seed, candidates, candidate_list, work_cap, timing
//   [reward_free] rewards
//   [sweep]       episodes, seeds, presets
//
// '#' starts a comment. Lists are comma separated; seeds also accept a..b.
struct ExperimentSpec {
  std::string name = "experiment";
  std::string output;
  EnvSpec env;
  ClassSpec cls;
  RunConfig run;
  std::vector<std::string> rewards;  // terminal | zero | env
  SweepSpec sweep;
};

ExperimentSpec parse_spec(std::string_view text);
std::string serialize_spec(const ExperimentSpec& spec);

// Field-level checks beyond parsing (ranges, kinds, combinations).
void validate_spec(const ExperimentSpec& spec);

struct ExpandedRun {
  RunConfig run;
  std::string path;  // relative to the experiment directory; empty for a single run
};

// Cross product of the sweep axes (episodes x presets x seeds), or the single
// configured run when there are no axes.
std::vector<ExpandedRun> expand_sweep(const ExperimentSpec& spec);

std::string planner_name(PlannerKind kind);
std::string preset_name(SamplerPreset preset);

}  // namespace rloss
