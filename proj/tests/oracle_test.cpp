#include <gtest/gtest.h>

#include <sstream>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/oracle.hpp"
#include "keyshap/skeleton.hpp"
#include "support.hpp"

namespace keyshap {
namespace {

using testing::letters;

SyntheticModelConfig two_player_config() {
  SyntheticModelConfig cfg;
  cfg.base = {0.8, 0.8};
  cfg.recovery = SquareMatrix(2);
  cfg.recovery(0, 1) = cfg.recovery(1, 0) = 0.5;
  return cfg;
}

TEST(Coalition, HexRoundTripAndBounds) {
  const auto c = Coalition::from_indices(17, std::vector<std::size_t>{0, 16});
  EXPECT_EQ(c.hex(), "0x10001");
  EXPECT_EQ(Coalition::parse_hex("0x10001", 17), c);
  EXPECT_EQ(c.count(), 2u);
  EXPECT_EQ(Coalition::full(17).bits(), 0x1ffffu);
  EXPECT_THROW(Coalition::parse_hex("0x20000", 17), Error);
  EXPECT_THROW(Coalition(3, 0x8), Error);
}

TEST(TabularOracle, DirectLookupAndMissingCoalition) {
  const auto oracle = parse_tabular_oracle("coalition_hex,v0,v1\n0x3,0.9,0.8\n0x1,0.9,0.2\n", letters(2));
  EXPECT_EQ(oracle.eval(InstanceSet::all(), Coalition(2, 0x1), 0), (PerfVector{0.9, 0.2}));
  try {
    oracle.eval(InstanceSet::all(), Coalition(2, 0x2), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingCoalition);
    EXPECT_EQ(e.payload(), "0x2");
  }
}

TEST(TabularOracle, RejectsBadFiles) {
  EXPECT_THROW(parse_tabular_oracle("0x1,0.9,0.2\n", letters(2)), Error);       // no full coalition
  EXPECT_THROW(parse_tabular_oracle("0x3,1.2,0.2\n", letters(2)), Error);       // out of range
  EXPECT_THROW(parse_tabular_oracle("0x3,0.9\n", letters(2)), Error);           // short row
  EXPECT_THROW(parse_tabular_oracle("0x3,0.9,0.2\n0x3,0.9,0.2\n", letters(2)), Error);
}

TEST(TabularOracle, WidthMismatchIsSchemaError) {
  const auto oracle = parse_tabular_oracle("0x3,0.9,0.8\n", letters(2));
  try {
    oracle.eval(InstanceSet::all(), Coalition(3, 0x3), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchemaMismatch);
  }
}

TEST(TabularOracle, TableTwoFixture) {
  const auto& sk = default_skeleton();
  const auto oracle = load_tabular_oracle(testing::fixture("table2_oracle.csv"), sk.schema());
  const auto full = oracle.eval(InstanceSet::all(), Coalition::full(17), 0);
  EXPECT_DOUBLE_EQ(full[0], 0.761);
  const auto no_nose = oracle.eval(InstanceSet::all(), Coalition::full(17).without(0), 0);
  EXPECT_NEAR(no_nose[0], 0.555, 1e-12);
  const auto back = parse_tabular_oracle(write_tabular_oracle(oracle), sk.schema());
  EXPECT_EQ(back.table(), oracle.table());
}

TEST(SyntheticOracle, TwoPlayerExamples) {
  const SyntheticOracle oracle(two_player_config(), letters(2));
  const auto all = InstanceSet::all();
  EXPECT_EQ(oracle.eval(all, Coalition(2, 0x3), 0), (PerfVector{0.8, 0.8}));
  EXPECT_EQ(oracle.eval(all, Coalition(2, 0x2), 0), (PerfVector{0.4, 0.8}));
  EXPECT_EQ(oracle.eval(all, Coalition(2, 0x0), 0), (PerfVector{0.0, 0.0}));
}

TEST(SyntheticOracle, HandEvaluatedThreeKeypoints) {
  SyntheticModelConfig cfg;
  cfg.base = {0.9, 0.6, 0.5};
  cfg.recovery = SquareMatrix(3);
  cfg.recovery(0, 1) = 0.3;
  cfg.recovery(0, 2) = 0.2;
  cfg.recovery(2, 0) = 0.7;
  const SyntheticOracle oracle(cfg, letters(3));
  const auto v = oracle.eval(InstanceSet::all(), Coalition(3, 0b110), 0);
  EXPECT_NEAR(v[0], 0.9 * 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(v[1], 0.6);
  EXPECT_DOUBLE_EQ(v[2], 0.5);
  const auto w = oracle.eval(InstanceSet::all(), Coalition(3, 0b001), 0);
  EXPECT_NEAR(w[2], 0.5 * 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(w[1], 0.0);
}

TEST(SyntheticOracle, ConfigValidation) {
  auto cfg = two_player_config();
  cfg.recovery(0, 1) = 0.7;
  cfg.recovery(0, 0) = 0.4;
  EXPECT_THROW(SyntheticOracle(cfg, letters(2)), Error);
  cfg = two_player_config();
  cfg.base[1] = 0.0;
  EXPECT_THROW(SyntheticOracle(cfg, letters(2)), Error);
  cfg = two_player_config();
  cfg.noise_sd = -1.0;
  EXPECT_THROW(SyntheticOracle(cfg, letters(2)), Error);
}

TEST(SyntheticOracle, ConfigJsonRoundTrip) {
  auto cfg = two_player_config();
  cfg.noise_sd = 0.01;
  cfg.seed = 9;
  const auto back = SyntheticModelConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.base, cfg.base);
  EXPECT_EQ(back.recovery, cfg.recovery);
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

// Noise keyed on (instance, coalition, trial): call order never matters.
TEST(SyntheticOracleProperty, DeterministicUnderReordering) {
  CounterRng rng(5);
  const auto grouping = grouping_from_sizes({4, 4, 4});
  auto cfg = testing::block_config(grouping, rng, 0.1);
  cfg.noise_sd = 0.05;
  const SyntheticOracle oracle(cfg, letters(12));
  const InstanceSet ids{{"a", "b", "c"}};
  std::vector<std::pair<std::uint64_t, std::uint64_t>> queries;
  for (int q = 0; q < 64; ++q) queries.emplace_back(rng.below(1u << 12), rng.below(4));
  std::vector<PerfVector> first;
  for (auto [bits, trial] : queries) first.push_back(oracle.eval(ids, Coalition(12, bits), trial));
  for (std::size_t q = queries.size(); q-- > 0;)
    EXPECT_EQ(oracle.eval(ids, Coalition(12, queries[q].first), queries[q].second), first[q]);
  EXPECT_NE(oracle.eval(ids, Coalition(12, 5), 0), oracle.eval(ids, Coalition(12, 5), 1));
}

TEST(SyntheticOracleProperty, NoiselessIsMonotone) {
  CounterRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    SyntheticModelConfig cfg;
    cfg.recovery = SquareMatrix(n);
    for (std::size_t i = 0; i < n; ++i) {
      cfg.base.push_back(rng.uniform(0.05, 1.0));
      double left = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) left -= cfg.recovery(i, j) = left * rng.uniform(0.0, 0.5);
    }
    const SyntheticOracle oracle(cfg, letters(n));
    for (int pair = 0; pair < 40; ++pair) {
      const std::uint64_t t = rng.below(std::uint64_t{1} << n);
      const std::uint64_t s = t & rng.below(std::uint64_t{1} << n);
      const auto vs = oracle.eval(InstanceSet::all(), Coalition(n, s), 0);
      const auto vt = oracle.eval(InstanceSet::all(), Coalition(n, t), 0);
      for (std::size_t i = 0; i < n; ++i) EXPECT_LE(vs[i], vt[i] + 1e-15);
    }
  }
}

TEST(ServeOracle, SpeaksTheLineProtocol) {
  const SyntheticOracle oracle(two_player_config(), letters(2));
  std::istringstream in(
      "{\"op\":\"eval\",\"instances\":[\"all\"],\"visible\":[1],\"trial\":0}\n"
      "{\"op\":\"eval\",\"instances\":[\"all\"],\"visible\":[7],\"trial\":0}\n");
  std::ostringstream out;
  serve_oracle(oracle, in, out);
  const auto text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), R"({"op":"hello","n":2,"names":["k0","k1"]})");
  EXPECT_NE(text.find(R"({"values":[0.4,0.8]})"), std::string::npos) << text;
  EXPECT_NE(text.find(R"({"error":)"), std::string::npos);
}

std::string cli() { return KEYSHAP_CLI_PATH; }

TEST(ExternalOracle, MatchesInProcessSynthetic) {
  const auto& sk = default_skeleton();
  const auto cfg_path = testing::fixture("synthetic_coco.json");
  const auto cfg = SyntheticModelConfig::from_json(read_text_file(cfg_path));
  const SyntheticOracle local(cfg, sk.schema());
  ExternalOracle remote(cli() + " oracle serve-synthetic --config " + cfg_path.string(), sk.schema(), 10000);
  CounterRng rng(3);
  const InstanceSet ids{{"img1", "img2"}};
  for (int q = 0; q < 40; ++q) {
    const Coalition c(17, rng.below(1u << 17));
    const auto trial = rng.below(100);
    EXPECT_EQ(remote.eval(ids, c, trial), local.eval(ids, c, trial));
  }
}

TEST(ExternalOracle, HandshakeMismatchAborts) {
  try {
    ExternalOracle bad("printf '{\"op\":\"hello\",\"n\":2,\"names\":[\"x\",\"y\"]}\\n'; cat >/dev/null",
                       letters(2), 5000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchemaMismatch);
    EXPECT_NE(e.payload().find("\"x\""), std::string::npos);
  }
}

TEST(ExternalOracle, ErrorReplyCarriesPayload) {
  ExternalOracle oracle(
      "printf '{\"op\":\"hello\",\"n\":2,\"names\":[\"k0\",\"k1\"]}\\n'; read line; "
      "printf '{\"error\":\"gpu on fire\"}\\n'; cat >/dev/null",
      letters(2), 5000);
  try {
    oracle.eval(InstanceSet::all(), Coalition(2, 3), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOracleIo);
    EXPECT_NE(e.payload().find("gpu on fire"), std::string::npos);
  }
}

TEST(ExternalOracle, TimeoutIsOracleIo) {
  ExternalOracle oracle("printf '{\"op\":\"hello\",\"n\":2,\"names\":[\"k0\",\"k1\"]}\\n'; sleep 5",
                        letters(2), 200);
  try {
    oracle.eval(InstanceSet::all(), Coalition(2, 3), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOracleIo);
  }
}

TEST(ExternalOracle, ChildThatExitsEarly) {
  EXPECT_THROW(ExternalOracle("exit 0", letters(2), 2000), Error);
}

TEST(CountingOracle, CountsCallsAndDistinctCoalitions) {
  const SyntheticOracle inner(two_player_config(), letters(2));
  CountingOracle counter(inner);
  counter.eval(InstanceSet::all(), Coalition(2, 1), 0);
  counter.eval(InstanceSet::all(), Coalition(2, 1), 0);
  counter.eval(InstanceSet::all(), Coalition(2, 3), 0);
  EXPECT_EQ(counter.calls(), 3u);
  EXPECT_EQ(counter.distinct_coalitions(), 2u);
}

}  // namespace
}  // namespace keyshap
