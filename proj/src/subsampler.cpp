#include "rloss/subsampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "rloss/errors.hpp"

namespace rloss {

std::size_t SubDataset::unique_points() const {
  std::set<StateAction> seen;
  for (const auto& e : entries_) seen.insert(e.point);
  return seen.size();
}

double SubDataset::total_weight() const {
  double total = 0.0;
  for (const auto& e : entries_) total += static_cast<double>(e.weight);
  return total;
}

WeightedSet SubDataset::as_weighted_set() const {
  WeightedSet out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back({e.point, static_cast<double>(e.weight)});
  return out;
}

void SubDataset::add(BufferEntry entry) {
  if (entry.weight < 1) throw InvalidInput("buffer weights must be positive integers");
  entries_.push_back(std::move(entry));
  ++generation_;
}

bool buffer_changed(const SubDataset& before, const SubDataset& after) {
  return before.generation() != after.generation();
}

void SamplerConfig::validate() const {
  if (!(constant > 0.0)) throw InvalidInput("sampler constant must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  if (horizon < 1) throw InvalidInput("horizon must be positive");
  if (!(total_steps >= horizon)) throw InvalidInput("total_steps must be at least the horizon");
  const double hi = total_steps * horizon * horizon;
  if (!(beta >= 1.0 && beta <= hi)) throw InvalidInput("beta must lie in [1, T H^2]");
  if (!(log_factor > 0.0)) throw InvalidInput("log_factor must be positive");
}

SamplerConfig SamplerConfig::theory(const FunctionClass& cls, int episodes, double delta,
                                    double beta) {
  SamplerConfig cfg;
  cfg.constant = 1.0;
  cfg.delta = delta;
  cfg.horizon = cls.horizon();
  cfg.total_steps = static_cast<double>(episodes) * cls.horizon();
  const double t = cfg.total_steps;
  cfg.beta = beta;
  cfg.log_factor = std::log(t / delta) + cls.log_cover_size(std::sqrt(delta / (64.0 * t * t * t)));
  cfg.round_eps = 1.0 / (16.0 * std::sqrt(64.0 * t * t * t / delta));
  return cfg;
}

SamplerConfig SamplerConfig::practical(int episodes, int horizon, double delta, double beta) {
  SamplerConfig cfg;
  cfg.constant = 2.0;
  cfg.log_factor = 1.0;
  cfg.delta = delta;
  cfg.horizon = horizon;
  cfg.total_steps = static_cast<double>(episodes) * horizon;
  cfg.beta = beta;
  return cfg;
}

double sensitivity_score(const FunctionClass& cls, const WeightedSet& buffer, const StateAction& z,
                         const SamplerConfig& cfg, OracleCounts* counts) {
  if (const auto* finite = dynamic_cast<const FiniteClass*>(&cls)) {
    if (counts) ++counts->small;
    return exact_sensitivity(*finite, buffer, z, cfg.beta, cfg.total_steps);
  }
  return estimate_sensitivity(cls, buffer, z, cfg.beta, cfg.total_steps, counts);
}

SampleDecision sampling_probability(double score, const SamplerConfig& cfg) {
  if (!(score >= 0.0 && score <= 1.0)) throw InvalidInput("score must lie in [0, 1]");
  SampleDecision d;
  d.q = std::min(1.0, cfg.constant * score * cfg.log_factor);
  if (d.q <= 0.0) return d;
  if (d.q >= 1.0) {
    d.probability = 1.0;
    d.weight = 1;
    return d;
  }
  // Weights above 2^53 would no longer be exact doubles.
  const double n = std::min(std::floor(1.0 / d.q), 0x1.0p53);
  d.weight = static_cast<std::int64_t>(n);
  d.probability = 1.0 / n;
  return d;
}

bool online_sample_scored(const FunctionClass& cls, SubDataset& buffer, const StateAction& z,
                          double score, const SamplerConfig& cfg, Rng& rng, int episode) {
  const SampleDecision d = sampling_probability(score, cfg);
  if (d.probability <= 0.0) return false;
  if (!(uniform01(rng) < d.probability)) return false;
  StateAction rounded = cfg.round_eps > 0.0 ? cls.round(z, cfg.round_eps) : z;
  buffer.add({std::move(rounded), d.weight, episode, d.probability, score});
  return true;
}

bool online_sample(const FunctionClass& cls, SubDataset& buffer, const StateAction& z,
                   const SamplerConfig& cfg, Rng& rng, int episode, OracleCounts* counts) {
  const double score = sensitivity_score(cls, buffer.as_weighted_set(), z, cfg, counts);
  return online_sample_scored(cls, buffer, z, score, cfg, rng, episode);
}

// ------------------------------------------------------------- CSV

std::string encode_point(const StateAction& z) {
  std::string out = std::to_string(z.state) + ":" + std::to_string(z.action);
  if (!z.features.empty()) {
    out += ':';
    char buf[32];
    for (std::size_t i = 0; i < z.features.size(); ++i) {
      if (i) out += ';';
      std::snprintf(buf, sizeof buf, "%.17g", z.features[i]);
      out += buf;
    }
  }
  return out;
}

namespace {

template <class T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInput(std::string("bad ") + what + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

StateAction decode_point(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2 && parts.size() != 3) {
    throw InvalidInput("bad point encoding: '" + std::string(text) + "'");
  }
  StateAction z;
  z.state = parse_number<int>(parts[0], "state");
  z.action = parse_number<int>(parts[1], "action");
  if (parts.size() == 3) {
    for (auto f : split(parts[2], ';')) z.features.push_back(parse_number<double>(f, "feature"));
  }
  return z;
}

void write_buffer_csv(std::ostream& out, const std::vector<SubDataset>& buffers) {
  out << "episode,h,point,weight,p,score\n";
  char buf[64];
  for (std::size_t h = 0; h < buffers.size(); ++h) {
    for (const auto& e : buffers[h].entries()) {
      out << e.episode << ',' << h << ',' << encode_point(e.point) << ',' << e.weight << ',';
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", e.probability, e.score);
      out << buf << '\n';
    }
  }
}

std::vector<SubDataset> read_buffer_csv(std::istream& in, int horizon) {
  std::vector<SubDataset> buffers(static_cast<std::size_t>(horizon));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "episode,h,point,weight,p,score") throw InvalidInput("buffer CSV: bad header");
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    try {
      if (cols.size() != 6) throw InvalidInput("expected 6 columns");
      BufferEntry e;
      e.episode = parse_number<int>(cols[0], "episode");
      const int h = parse_number<int>(cols[1], "h");
      if (h < 0 || h >= horizon) throw InvalidInput("step out of range");
      e.point = decode_point(cols[2]);
      e.weight = parse_number<std::int64_t>(cols[3], "weight");
      e.probability = parse_number<double>(cols[4], "p");
      e.score = parse_number<double>(cols[5], "score");
      buffers[static_cast<std::size_t>(h)].add(std::move(e));
    } catch (const InvalidInput& err) {
      throw InvalidInput("buffer CSV line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return buffers;
}

}  // namespace rloss
