#include "doctest.h"

#include <cmath>
#include <sstream>

#include "rloss/errors.hpp"
#include "rloss/subsampler.hpp"
#include "support.hpp"

using namespace rloss;

namespace {

SamplerConfig unit_config(double beta = 1.0) {
  SamplerConfig cfg;
  cfg.constant = 1.0;
  cfg.log_factor = 1.0;
  cfg.total_steps = 1000.0;
  cfg.horizon = 2;
  cfg.beta = beta;
  return cfg;
}

}  // namespace

TEST_CASE("sensitivity score") {
  FiniteClass two({{0.0, 0.0}, {1.0, 2.0}}, 1, 2, 2);
  const auto cfg = unit_config();
  CHECK(sensitivity_score(two, {}, two.point(0, 0), cfg) == 1.0);

  FiniteClass single({{0.3, 0.4}}, 1, 2, 2);
  CHECK(sensitivity_score(single, {}, single.point(0, 1), cfg) == 0.0);

  // Buffer {z with weight 3}, gap 2 at z: 4 / (12 + 1).
  const WeightedSet buf{{two.point(0, 1), 3.0}};
  OracleCounts counts;
  CHECK(sensitivity_score(two, buf, two.point(0, 1), cfg, &counts) == doctest::Approx(4.0 / 13.0));
  CHECK(counts.small == 1);
}

TEST_CASE("sampling probability") {
  const auto cfg = unit_config();
  auto d = sampling_probability(0.3, cfg);
  CHECK(d.probability == doctest::Approx(1.0 / 3.0));
  CHECK(d.weight == 3);
  d = sampling_probability(0.5, cfg);
  CHECK(d.probability == 0.5);
  CHECK(d.weight == 2);
  CHECK(sampling_probability(1.0, cfg).probability == 1.0);
  auto scaled = cfg;
  scaled.constant = 4.0;
  CHECK(sampling_probability(0.9, scaled).probability == 1.0);
  d = sampling_probability(0.0, cfg);
  CHECK(d.probability == 0.0);
  CHECK(d.weight == 0);

  // p = 1 / floor(1 / q) is the smallest reciprocal of an integer that is >= q.
  Rng rng = make_rng(12, 0);
  for (int i = 0; i < 1000; ++i) {
    const double q = 1e-3 + uniform01(rng);
    const auto dec = sampling_probability(std::min(q, 1.0), cfg);
    long n = 1;
    while (1.0 / static_cast<double>(n + 1) >= std::min(q, 1.0)) ++n;
    CHECK(dec.weight == n);
    CHECK(dec.probability >= std::min(q, 1.0));
  }
}

TEST_CASE("online sample") {
  const auto cfg = unit_config();
  SUBCASE("p = 1") {
    FiniteClass two({{0.0}, {1.0}}, 1, 1, 2);
    Rng rng = make_rng(1, 2);
    for (int i = 0; i < 100; ++i) {
      SubDataset buf;
      CHECK(online_sample(two, buf, two.point(0, 0), cfg, rng, 1));
      CHECK(buf.entries().at(0).weight == 1);
    }
  }
  SUBCASE("p = 0 consumes nothing") {
    FiniteClass single({{0.5}}, 1, 1, 2);
    Rng rng = make_rng(1, 2);
    const Rng before = rng;
    SubDataset buf;
    for (int i = 0; i < 10000; ++i) CHECK_FALSE(online_sample(single, buf, single.point(0, 0), cfg, rng, 1));
    CHECK(buf.generation() == 0);
    CHECK(rng == before);
  }
  SUBCASE("p = 1/3") {
    FiniteClass two({{0.0}, {std::sqrt(0.3)}}, 1, 1, 2);
    Rng rng = make_rng(3, 2);
    const int n = 30000;
    int added = 0;
    for (int i = 0; i < n; ++i) {
      SubDataset buf;
      if (online_sample(two, buf, two.point(0, 0), cfg, rng, 1)) {
        ++added;
        CHECK(buf.entries().at(0).weight == 3);
      }
    }
    const double p = 1.0 / 3.0;
    CHECK(std::abs(added / double(n) - p) <= 3.0 * testing_support::sigma_binomial(p, n));
  }
}

TEST_CASE("buffer bookkeeping") {
  SubDataset a;
  CHECK_FALSE(buffer_changed(a, a));
  SubDataset b = a;
  b.add({StateAction{0, 1, {}}, 2, 1, 0.5, 0.25});
  CHECK(buffer_changed(a, b));
  b.add({StateAction{0, 1, {}}, 1, 2, 1.0, 1.0});
  CHECK(b.distinct_count() == 2);
  CHECK(b.unique_points() == 1);
  CHECK(b.total_weight() == 3.0);
  CHECK_THROWS_AS(b.add({StateAction{0, 0, {}}, 0, 1, 1.0, 1.0}), InvalidInput);
}

TEST_CASE("config validation and presets") {
  auto cfg = unit_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = 0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.beta = 1000.0 * 4.0 + 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);

  auto cls = testing_support::random_finite(2, 7, 2, 2, 3);
  const auto th = SamplerConfig::theory(*cls, 50, 0.1, 2.0);
  const double t = 150.0;
  CHECK(th.constant == 1.0);
  CHECK(th.total_steps == t);
  CHECK(th.log_factor == doctest::Approx(std::log(t / 0.1) + std::log(7.0)));
  CHECK(th.round_eps == doctest::Approx(1.0 / (16.0 * std::sqrt(64.0 * t * t * t / 0.1))));
  const auto pr = SamplerConfig::practical(50, 3, 0.1, 2.0);
  CHECK(pr.constant * pr.log_factor == 2.0);
}

TEST_CASE("point encoding and buffer CSV") {
  const StateAction plain{3, 1, {}};
  CHECK(encode_point(plain) == "3:1");
  CHECK(decode_point("3:1") == plain);
  const StateAction feat{0, 2, {0.1, -2.5e-7, 3.0}};
  CHECK(decode_point(encode_point(feat)) == feat);

  std::vector<SubDataset> bufs(2);
  bufs[0].add({plain, 3, 2, 1.0 / 3.0, 0.3});
  bufs[1].add({feat, 1, 5, 1.0, 0.9});
  bufs[1].add({plain, 2, 6, 0.5, 0.4});
  std::stringstream ss;
  write_buffer_csv(ss, bufs);
  const auto back = read_buffer_csv(ss, 2);
  REQUIRE(back.size() == 2);
  CHECK(back[1].entries().size() == 2);
  CHECK(back[1].entries()[0].point == feat);
  CHECK(back[0].entries()[0].weight == 3);
  CHECK(back[0].entries()[0].episode == 2);
  CHECK(back[0].entries()[0].probability == bufs[0].entries()[0].probability);

  std::stringstream bad("episode,h,point,weight,p,score\n1,0,0:0,1,1,1\n1,5,0:0,1,1,1\n");
  try {
    read_buffer_csv(bad, 2);
    FAIL("expected a parse error");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
