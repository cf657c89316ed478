#include "rloss/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace rloss {

SpecError::SpecError(int line, const std::string& field, const std::string& message)
    : InvalidInput((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                   (field.empty() ? message : field + ": " + message)),
      line_(line),
      field_(field),
      detail_(message) {}

std::string planner_name(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::A: return "A";
    case PlannerKind::B: return "B";
    case PlannerKind::RewardFree: return "reward_free";
  }
  return "?";
}

std::string preset_name(SamplerPreset preset) {
  return preset == SamplerPreset::Theory ? "theory" : "practical";
}

namespace {

std::string beta_mode_name(BetaMode m) {
  switch (m) {
    case BetaMode::TheoryA: return "theory_a";
    case BetaMode::TheoryB: return "theory_b";
    case BetaMode::TheoryRewardFree: return "theory_reward_free";
    case BetaMode::Manual: return "manual";
  }
  return "?";
}

std::string candidate_name(CandidateMode m) {
  switch (m) {
    case CandidateMode::Product: return "product";
    case CandidateMode::Diagonal: return "diagonal";
    case CandidateMode::List: return "list";
  }
  return "?";
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class FieldParser {
 public:
  FieldParser(int line, std::string field, std::string value)
      : line_(line), field_(std::move(field)), value_(std::move(value)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw SpecError(line_, field_, msg); }

  double real() const {
    double v = 0.0;
    const char* end = value_.data() + value_.size();
    auto [p, ec] = std::from_chars(value_.data(), end, v);
    if (ec != std::errc() || p != end) fail("expected a number, got '" + value_ + "'");
    return v;
  }
  template <class T>
  T integer() const {
    T v{};
    const char* end = value_.data() + value_.size();
    auto [p, ec] = std::from_chars(value_.data(), end, v);
    if (ec != std::errc() || p != end) fail("expected an integer, got '" + value_ + "'");
    return v;
  }
  bool boolean() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
    if (value_ == "false" || value_ == "0" || value_ == "no") return false;
    fail("expected true or false, got '" + value_ + "'");
  }
  std::string choice(std::initializer_list<const char*> options) const {
    for (const char* o : options) {
      if (value_ == o) return value_;
    }
    std::string list;
    for (const char* o : options) list += std::string(list.empty() ? "" : ", ") + o;
    fail("unknown value '" + value_ + "' (expected one of " + list + ")");
  }
  const std::string& text() const { return value_; }

 private:
  int line_;
  std::string field_;
  std::string value_;
};

std::vector<std::uint64_t> parse_seeds(const FieldParser& f) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(f.text(), ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(FieldParser(0, "", item).integer<std::uint64_t>());
      continue;
    }
    const auto lo = FieldParser(0, "", trim(item.substr(0, dots))).integer<std::uint64_t>();
    const auto hi = FieldParser(0, "", trim(item.substr(dots + 2))).integer<std::uint64_t>();
    if (hi < lo) f.fail("empty seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) f.fail("empty list");
  return out;
}

}  // namespace

ExperimentSpec parse_spec(std::string_view text) {
  ExperimentSpec spec;
  std::string section;
  bool beta_theory = false;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SpecError(line_no, "", "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known{"experiment", "env", "class", "run", "reward_free", "sweep"};
      if (!known.count(section)) throw SpecError(line_no, "", "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError(line_no, "", "expected key = value");
    if (section.empty()) throw SpecError(line_no, "", "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string field = section + "." + key;
    if (!seen.emplace(field, line_no).second) throw SpecError(line_no, field, "duplicate key");
    const FieldParser f(line_no, field, trim(line.substr(eq + 1)));

    if (section == "experiment") {
      if (key == "name") spec.name = f.text();
      else if (key == "output") spec.output = f.text();
      else f.fail("unknown key");
    } else if (section == "env") {
      auto& e = spec.env;
      if (key == "kind") e.kind = f.choice({"tabular", "linear", "chain", "file"});
      else if (key == "seed") e.seed = f.integer<std::uint64_t>();
      else if (key == "states") e.states = f.integer<int>();
      else if (key == "actions") e.actions = f.integer<int>();
      else if (key == "horizon") e.horizon = f.integer<int>();
      else if (key == "dim") e.dim = f.integer<int>();
      else if (key == "length") e.length = f.integer<int>();
      else if (key == "path") e.path = f.text();
      else f.fail("unknown key");
    } else if (section == "class") {
      auto& c = spec.cls;
      if (key == "kind") c.kind = f.choice({"onehot", "linear", "finite", "qstar"});
      else if (key == "ball") c.ball = f.real();
      else if (key == "ridge") c.ridge = f.real();
      else if (key == "path") c.path = f.text();
      else if (key == "distractors") c.distractors = f.integer<int>();
      else if (key == "seed") c.seed = f.integer<std::uint64_t>();
      else f.fail("unknown key");
    } else if (section == "run") {
      auto& r = spec.run;
      if (key == "episodes") r.episodes = f.integer<int>();
      else if (key == "delta") r.delta = f.real();
      else if (key == "planner") {
        const auto v = f.choice({"A", "B", "reward_free"});
        r.planner = v == "A" ? PlannerKind::A : v == "B" ? PlannerKind::B : PlannerKind::RewardFree;
      } else if (key == "beta_mode") {
        const auto v = f.choice({"manual", "theory", "theory_a", "theory_b", "theory_reward_free"});
        beta_theory = v == "theory";
        r.beta_mode = v == "theory_a" ? BetaMode::TheoryA
                      : v == "theory_b" ? BetaMode::TheoryB
                      : v == "theory_reward_free" ? BetaMode::TheoryRewardFree
                                                  : BetaMode::Manual;
      } else if (key == "beta") r.beta = f.real();
      else if (key == "beta_constant") r.beta_constant = f.real();
      else if (key == "zeta") r.zeta = f.real();
      else if (key == "preset") {
        r.preset = f.choice({"practical", "theory"}) == "theory" ? SamplerPreset::Theory : SamplerPreset::Practical;
      } else if (key == "sampler_beta") r.sampler_beta = f.real();
      else if (key == "sampler_constant") r.sampler_constant = f.real();
      else if (key == "sampler_log_factor") r.sampler_log_factor = f.real();
      else if (key == "seed") r.seed = f.integer<std::uint64_t>();
      else if (key == "candidates") {
        const auto v = f.choice({"product", "diagonal", "list"});
        r.confidence.mode = v == "product" ? CandidateMode::Product
                            : v == "diagonal" ? CandidateMode::Diagonal
                                              : CandidateMode::List;
      } else if (key == "candidate_list") {
        r.confidence.candidates.clear();
        for (const auto& tuple : split_list(f.text(), ';')) {
          std::vector<std::size_t> t;
          for (const auto& idx : split_list(tuple, ' ')) t.push_back(FieldParser(line_no, field, idx).integer<std::size_t>());
          r.confidence.candidates.push_back(std::move(t));
        }
      } else if (key == "work_cap") r.confidence.work_cap = f.real();
      else if (key == "timing") r.timing = f.boolean();
      else f.fail("unknown key");
    } else if (section == "reward_free") {
      if (key == "rewards") {
        spec.rewards.clear();
        for (const auto& item : split_list(f.text(), ',')) {
          spec.rewards.push_back(FieldParser(line_no, field, item).choice({"terminal", "zero", "env"}));
        }
      } else {
        f.fail("unknown key");
      }
    } else if (section == "sweep") {
      if (key == "episodes") {
        for (const auto& item : split_list(f.text(), ',')) spec.sweep.episodes.push_back(FieldParser(line_no, field, item).integer<int>());
        if (spec.sweep.episodes.empty()) f.fail("empty list");
      } else if (key == "seeds") {
        spec.sweep.seeds = parse_seeds(f);
      } else if (key == "presets") {
        for (const auto& item : split_list(f.text(), ',')) spec.sweep.presets.push_back(FieldParser(line_no, field, item).choice({"practical", "theory"}));
        if (spec.sweep.presets.empty()) f.fail("empty list");
      } else {
        f.fail("unknown key");
      }
    }
  }
  if (beta_theory) {
    spec.run.beta_mode = spec.run.planner == PlannerKind::A   ? BetaMode::TheoryA
                         : spec.run.planner == PlannerKind::B ? BetaMode::TheoryB
                                                              : BetaMode::TheoryRewardFree;
  }
  try {
    validate_spec(spec);
  } catch (const SpecError& e) {
    const auto it = seen.find(e.field());
    if (e.line() > 0 || it == seen.end()) throw;
    throw SpecError(it->second, e.field(), e.detail());
  }
  return spec;
}

void validate_spec(const ExperimentSpec& spec) {
  auto bad = [](const std::string& field, const std::string& msg) { throw SpecError(0, field, msg); };
  if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos || spec.name == "." || spec.name == "..") {
    bad("experiment.name", "must be a plain, nonempty name");
  }
  const auto& e = spec.env;
  if (e.kind == "file") {
    if (e.path.empty()) bad("env.path", "required for kind = file");
  } else {
    if (e.horizon < 1) bad("env.horizon", "must be >= 1");
    if (e.kind == "chain") {
      if (e.length < 1 || e.length > e.horizon) bad("env.length", "must lie in [1, horizon]");
    } else {
      if (e.states < 1) bad("env.states", "must be >= 1");
      if (e.actions < 1) bad("env.actions", "must be >= 1");
      if (e.kind == "linear" && (e.dim < 1 || e.dim > e.states * e.actions)) bad("env.dim", "must lie in [1, states * actions]");
    }
  }
  const auto& c = spec.cls;
  if (c.kind == "finite" && c.path.empty()) bad("class.path", "required for kind = finite");
  if (c.kind == "linear" && e.kind != "linear" && e.kind != "file") bad("class.kind", "linear needs a feature-carrying env");
  if (!(c.ridge >= 0.0)) bad("class.ridge", "must be >= 0");
  if (c.distractors < 0) bad("class.distractors", "must be >= 0");

  const auto& r = spec.run;
  if (r.episodes < 1) bad("run.episodes", "must be >= 1");
  if (!(r.delta > 0.0 && r.delta < 1.0)) bad("run.delta", "must lie in (0, 1)");
  if (r.beta_mode == BetaMode::Manual && !(r.beta >= 0.0)) bad("run.beta", "must be >= 0");
  if (!(r.beta_constant > 0.0)) bad("run.beta_constant", "must be positive");
  if (!(r.zeta >= 0.0)) bad("run.zeta", "must be >= 0");
  if (r.planner == PlannerKind::B && r.zeta != 0.0) bad("run.zeta", "not supported by planner B");
  if (r.planner == PlannerKind::B && c.kind != "finite" && c.kind != "qstar") bad("run.planner", "planner B needs a finite class");
  if (!(r.sampler_beta >= 0.0)) bad("run.sampler_beta", "must be >= 0");
  if (!(r.sampler_constant >= 0.0)) bad("run.sampler_constant", "must be >= 0");
  if (!(r.sampler_log_factor >= 0.0)) bad("run.sampler_log_factor", "must be >= 0");
  if (r.confidence.mode == CandidateMode::List && r.confidence.candidates.empty()) bad("run.candidate_list", "required for candidates = list");
  if (!(r.confidence.work_cap > 0.0)) bad("run.work_cap", "must be positive");
  if (r.planner == PlannerKind::RewardFree && spec.rewards.empty()) bad("reward_free.rewards", "required for planner = reward_free");
  for (int k : spec.sweep.episodes) {
    if (k < 1) bad("sweep.episodes", "must be >= 1");
  }
}

std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream o;
  o << "[experiment]\nname = " << spec.name << "\n";
  if (!spec.output.empty()) o << "output = " << spec.output << "\n";
  const auto& e = spec.env;
  o << "\n[env]\nkind = " << e.kind << "\nseed = " << e.seed << "\nstates = " << e.states
    << "\nactions = " << e.actions << "\nhorizon = " << e.horizon << "\ndim = " << e.dim
    << "\nlength = " << e.length << "\n";
  if (!e.path.empty()) o << "path = " << e.path << "\n";
  const auto& c = spec.cls;
  o << "\n[class]\nkind = " << c.kind << "\nball = " << fmt(c.ball) << "\nridge = " << fmt(c.ridge)
    << "\ndistractors = " << c.distractors << "\nseed = " << c.seed << "\n";
  if (!c.path.empty()) o << "path = " << c.path << "\n";
  const auto& r = spec.run;
  o << "\n[run]\nepisodes = " << r.episodes << "\ndelta = " << fmt(r.delta)
    << "\nplanner = " << planner_name(r.planner) << "\nbeta_mode = " << beta_mode_name(r.beta_mode)
    << "\nbeta = " << fmt(r.beta) << "\nbeta_constant = " << fmt(r.beta_constant)
    << "\nzeta = " << fmt(r.zeta) << "\npreset = " << preset_name(r.preset)
    << "\nsampler_beta = " << fmt(r.sampler_beta) << "\nsampler_constant = " << fmt(r.sampler_constant)
    << "\nsampler_log_factor = " << fmt(r.sampler_log_factor) << "\nseed = " << r.seed
    << "\ncandidates = " << candidate_name(r.confidence.mode) << "\n";
  if (!r.confidence.candidates.empty()) {
    o << "candidate_list = ";
    for (std::size_t i = 0; i < r.confidence.candidates.size(); ++i) {
      if (i) o << "; ";
      for (std::size_t j = 0; j < r.confidence.candidates[i].size(); ++j) o << (j ? " " : "") << r.confidence.candidates[i][j];
    }
    o << "\n";
  }
  o << "work_cap = " << fmt(r.confidence.work_cap) << "\ntiming = " << (r.timing ? "true" : "false") << "\n";
  if (!spec.rewards.empty()) {
    o << "\n[reward_free]\nrewards = ";
    for (std::size_t i = 0; i < spec.rewards.size(); ++i) o << (i ? ", " : "") << spec.rewards[i];
    o << "\n";
  }
  if (!spec.sweep.empty()) {
    o << "\n[sweep]\n";
    auto join = [&](const auto& v) {
      for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i];
      o << "\n";
    };
    if (!spec.sweep.episodes.empty()) { o << "episodes = "; join(spec.sweep.episodes); }
    if (!spec.sweep.seeds.empty()) { o << "seeds = "; join(spec.sweep.seeds); }
    if (!spec.sweep.presets.empty()) { o << "presets = "; join(spec.sweep.presets); }
  }
  return o.str();
}

std::vector<ExpandedRun> expand_sweep(const ExperimentSpec& spec) {
  if (spec.sweep.empty()) return {{spec.run, ""}};
  const auto episodes = spec.sweep.episodes.empty() ? std::vector<int>{spec.run.episodes} : spec.sweep.episodes;
  const auto seeds = spec.sweep.seeds.empty() ? std::vector<std::uint64_t>{spec.run.seed} : spec.sweep.seeds;
  std::vector<std::string> presets = spec.sweep.presets;
  if (presets.empty()) presets.push_back(preset_name(spec.run.preset));
  std::vector<ExpandedRun> out;
  std::set<std::string> paths;
  for (int k : episodes) {
    for (const auto& p : presets) {
      for (auto seed : seeds) {
        ExpandedRun er{spec.run, "K" + std::to_string(k) + "/" + p + "/seed" + std::to_string(seed)};
        er.run.episodes = k;
        er.run.seed = seed;
        er.run.preset = p == "theory" ? SamplerPreset::Theory : SamplerPreset::Practical;
        if (paths.insert(er.path).second) out.push_back(std::move(er));
      }
    }
  }
  return out;
}

}  // namespace rloss
