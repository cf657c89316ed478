#include "doctest.h"

#include <set>
#include <string>

#include "rloss/config.hpp"

using namespace rloss;

namespace {

const char* kFull = R"(# every section
[experiment]
name = full
output = out_dir

[env]
kind = chain
length = 4
horizon = 6

[class]
kind = qstar
distractors = 3
seed = 9

[run]
episodes = 250
delta = 0.05
planner = B
beta_mode = manual
beta = 2.5
preset = theory
seed = 4
candidates = diagonal
work_cap = 1e6

[reward_free]
rewards = terminal, zero

[sweep]
episodes = 100, 1000
seeds = 1..5
presets = practical, theory
)";

std::string error_of(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parse a full spec") {
  const auto spec = parse_spec(kFull);
  CHECK(spec.name == "full");
  CHECK(spec.output == "out_dir");
  CHECK(spec.env.kind == "chain");
  CHECK(spec.env.length == 4);
  CHECK(spec.cls.distractors == 3);
  CHECK(spec.run.episodes == 250);
  CHECK(spec.run.planner == PlannerKind::B);
  CHECK(spec.run.beta == 2.5);
  CHECK(spec.run.preset == SamplerPreset::Theory);
  CHECK(spec.run.confidence.mode == CandidateMode::Diagonal);
  CHECK(spec.rewards == std::vector<std::string>{"terminal", "zero"});
  CHECK(spec.sweep.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
}

TEST_CASE("serialize round trip is a fixed point") {
  const auto once = serialize_spec(parse_spec(kFull));
  CHECK(serialize_spec(parse_spec(once)) == once);
  const auto minimal = serialize_spec(parse_spec("[run]\nepisodes = 10\n"));
  CHECK(serialize_spec(parse_spec(minimal)) == minimal);
}

TEST_CASE("theory beta resolves by planner") {
  CHECK(parse_spec("[run]\nplanner = A\nbeta_mode = theory\n").run.beta_mode == BetaMode::TheoryA);
  CHECK(parse_spec("[class]\nkind = qstar\n[run]\nplanner = B\nbeta_mode = theory\n").run.beta_mode ==
        BetaMode::TheoryB);
}

TEST_CASE("errors name the line and field") {
  auto msg = error_of("[run]\ndelta = 1.5\n");
  CHECK(msg.find("run.delta") != std::string::npos);

  msg = error_of("[run]\nepisodes = 10\nbogus = 3\n");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("bogus") != std::string::npos);

  msg = error_of("[run]\nepisodes = 10\nepisodes = 20\n");
  CHECK(msg.find("line 3") != std::string::npos);

  msg = error_of("[run]\nepisodes = ten\n");
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("run.episodes") != std::string::npos);

  CHECK_FALSE(error_of("[nowhere]\n").empty());
  CHECK_FALSE(error_of("key_without_section = 1\n").empty());
  CHECK_FALSE(error_of("[class]\nkind = onehot\n[run]\nplanner = B\n").empty());
  CHECK_FALSE(error_of("[run]\nplanner = reward_free\n").empty());
  CHECK_FALSE(error_of("[sweep]\nseeds = 5..1\n").empty());
}

TEST_CASE("sweep expansion") {
  auto spec = parse_spec("[sweep]\nepisodes = 100, 1000\nseeds = 1..5\n");
  const auto runs = expand_sweep(spec);
  CHECK(runs.size() == 10);
  std::set<std::string> paths;
  for (const auto& r : runs) paths.insert(r.path);
  CHECK(paths.size() == 10);
  CHECK(runs.front().path == "K100/practical/seed1");
  CHECK(runs.front().run.episodes == 100);
  CHECK(runs.back().run.seed == 5);
  CHECK(runs.back().run.episodes == 1000);

  const auto single = expand_sweep(parse_spec("[run]\nepisodes = 7\n"));
  REQUIRE(single.size() == 1);
  CHECK(single[0].path.empty());
  CHECK(single[0].run.episodes == 7);
}
