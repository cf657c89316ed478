#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rloss/config.hpp"
#include "rloss/driver.hpp"
#include "rloss/env.hpp"
#include "rloss/funclass.hpp"

namespace rloss {

// Relative paths in the spec resolve against `base`.
EpisodicMdp build_env(const EnvSpec& spec, const std::filesystem::path& base);
std::unique_ptr<FunctionClass> build_class(const ClassSpec& spec, const EpisodicMdp& env,
                                           const std::filesystem::path& base);

// Finite class holding Q*_h for every step (first, in step order), the zero
// function, then `distractors` random tables with entries in [0, 2].
std::unique_ptr<FiniteClass> make_qstar_class(const EpisodicMdp& env, int distractors,
                                              std::uint64_t seed);

// r_h(s, a) = 1 exactly at the goal state on the last step.
RewardTable terminal_reward(const EpisodicMdp& env);
std::vector<RewardTable> build_rewards(const std::vector<std::string>& names, const EpisodicMdp& env);

struct CommandOptions {
  std::string spec_path;
  std::string out;  // overrides the spec's output root
  std::optional<std::uint64_t> seed;
  int parallel = 1;
  bool force = false;
  bool trace = false;
};

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Output root: --out, then the spec's `output`, then $RLOSS_OUT, then
// ./rloss_out.
std::filesystem::path output_root(const CommandOptions& opts, const ExperimentSpec& spec);

int cmd_run(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err);

struct DiagOptions {
  std::string dir;
  std::string check;  // distortion | optimism | eluder | cover
  std::size_t pairs = 200;
  double eps = 0.0;   // eluder resolution, <= 0 picks 1 / T
  std::uint64_t seed = 1;
};

std::vector<std::string> diag_checks();
int cmd_diag(const DiagOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace rloss
