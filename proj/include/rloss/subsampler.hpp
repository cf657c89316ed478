#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rloss/funclass.hpp"
#include "rloss/optimizer.hpp"
#include "rloss/rng.hpp"

namespace rloss {

struct BufferEntry {
  StateAction point;        // rounded point
  std::int64_t weight = 1;  // 1 / p, an integer multiplicity
  int episode = 0;
  double probability = 1.0;
  double score = 0.0;
};

// Weighted multiset of rounded points for one step h. Every mutation bumps
// the generation counter.
class SubDataset {
 public:
  const std::vector<BufferEntry>& entries() const { return entries_; }
  std::uint64_t generation() const { return generation_; }
  bool empty() const { return entries_.empty(); }

  // Each stored entry counts once: two additions of the same rounded point
  // are distinct elements.
  std::size_t distinct_count() const { return entries_.size(); }
  // Number of different rounded points.
  std::size_t unique_points() const;
  double total_weight() const;

  WeightedSet as_weighted_set() const;
  void add(BufferEntry entry);

 private:
  std::vector<BufferEntry> entries_;
  std::uint64_t generation_ = 0;
};

bool buffer_changed(const SubDataset& before, const SubDataset& after);

struct SamplerConfig {
  double constant = 2.0;     // C
  double delta = 0.1;
  double total_steps = 1.0;  // T = K H
  int horizon = 1;
  double beta = 1.0;
  double log_factor = 1.0;   // L
  double round_eps = 0.0;    // <= 0 keeps points as they are

  // Throws InvalidInput naming the offending field.
  void validate() const;

  // C = 1, L = log(T N(F, sqrt(delta / 64 T^3)) / delta), rounding at
  // 1 / (16 sqrt(64 T^3 / delta)).
  static SamplerConfig theory(const FunctionClass& cls, int episodes, double delta, double beta);
  // C L = 2 and no rounding.
  static SamplerConfig practical(int episodes, int horizon, double delta, double beta);
};

// min{1, sup (f1(z) - f2(z))^2 / (min{||f1 - f2||^2_buf, T (H + 1)^2} + beta)}.
// Exact for finite classes, two-approximate (from below) for linear ones.
double sensitivity_score(const FunctionClass& cls, const WeightedSet& buffer, const StateAction& z,
                         const SamplerConfig& cfg, OracleCounts* counts = nullptr);

struct SampleDecision {
  double q = 0.0;            // min{1, C score L}
  double probability = 0.0;  // 1 / floor(1 / q), or 0 when q == 0
  std::int64_t weight = 0;   // 1 / probability
};

SampleDecision sampling_probability(double score, const SamplerConfig& cfg);

// One Online-Sample step. Consumes exactly one draw unless p == 0. Returns
// true when an entry was added.
bool online_sample(const FunctionClass& cls, SubDataset& buffer, const StateAction& z,
                   const SamplerConfig& cfg, Rng& rng, int episode,
                   OracleCounts* counts = nullptr);
// Same, with the score already computed.
bool online_sample_scored(const FunctionClass& cls, SubDataset& buffer, const StateAction& z,
                          double score, const SamplerConfig& cfg, Rng& rng, int episode);

// CSV with header "episode,h,point,weight,p,score". Points encode as
// "s:a" or "s:a:x1;x2;...".
std::string encode_point(const StateAction& z);
StateAction decode_point(std::string_view text);
void write_buffer_csv(std::ostream& out, const std::vector<SubDataset>& buffers);
std::vector<SubDataset> read_buffer_csv(std::istream& in, int horizon);

}  // namespace rloss
