#include <gtest/gtest.h>

#include <cmath>

#include "keyshap/analysis.hpp"
#include "keyshap/error.hpp"
#include "keyshap/io.hpp"
#include "keyshap/skeleton.hpp"
#include "support.hpp"

namespace keyshap {
namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t c = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++c;
  return c;
}

TEST(Pearson, HandExamples) {
  const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{3, 2, 1};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
  const std::vector<double> d{1, 2, 3, 4}, e{1, 3, 2, 4};
  EXPECT_NEAR(pearson(d, e), 0.8, 1e-15);
  EXPECT_TRUE(std::isnan(pearson(std::vector<double>{1, 1, 1}, a)));
}

TEST(Correlation, PairwiseCompleteDeletion) {
  const auto table = parse_confidence_csv("a,b,c\n0.1,0.1,0.5\n0.2,0.3,\n0.3,0.2,0.1\n0.4,0.4,0.9\n,0.5,0.3\n");
  const auto result = confidence_correlation(table);
  EXPECT_NEAR(result.r(0, 1), 0.8, 1e-12);  // the last row is dropped for (a, b)
  EXPECT_DOUBLE_EQ(result.r(2, 2), 1.0);
  EXPECT_FALSE(result.warning());
}

TEST(Correlation, ZeroVarianceSentinel) {
  const auto table = parse_confidence_csv("a,b\n0.5,0.1\n0.5,0.9\n0.5,0.3\n");
  const auto result = confidence_correlation(table);
  EXPECT_EQ(result.r(0, 1), 0.0);
  EXPECT_TRUE(result.warning());
  ASSERT_EQ(result.zero_variance_pairs.size(), 1u);
}

TEST(Correlation, InsufficientPairs) {
  const auto table = parse_confidence_csv("a,b\n0.5,\n,0.9\n0.2,0.3\n");
  try {
    confidence_correlation(table);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientPairs);
  }
  EXPECT_THROW(parse_confidence_csv("a,b\n0.5,1.5\n0.1,0.2\n"), Error);
}

TEST(CorrelationProperty, SymmetricUnitDiagonalBounded) {
  CounterRng rng(12);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(10);
    ConfidenceTable table;
    table.names = testing::letters(n).names();
    for (std::size_t r = 0; r < 40; ++r) {
      auto& row = table.rows.emplace_back();
      for (std::size_t i = 0; i < n; ++i)
        row.push_back(rng.uniform() < 0.1 ? std::nullopt : std::optional<double>(rng.uniform()));
    }
    const auto r = confidence_correlation(table).r;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(r(i, i), 1.0, 1e-9);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(r(i, j), r(j, i), 1e-9);
        EXPECT_GE(r(i, j), -1.0);
        EXPECT_LE(r(i, j), 1.0);
      }
    }
  }
}

TEST(CorrelationProperty, WithinGroupExceedsCrossGroup) {
  const auto& schema = default_skeleton().schema();
  const auto grouping = grouping_from_json(read_text_file(testing::fixture("table1_groups.json")), schema);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto table = synthetic_confidence_table(grouping, schema.names(), 400, seed, 2.0, 1.0, 0.1);
    const auto r = confidence_correlation(table).r;
    double within = 0, cross = 0;
    int nw = 0, nc = 0;
    for (std::size_t i = 0; i < 17; ++i)
      for (std::size_t j = i + 1; j < 17; ++j) {
        if (grouping.group_of(i) == grouping.group_of(j)) {
          within += r(i, j);
          ++nw;
        } else {
          cross += r(i, j);
          ++nc;
        }
      }
    EXPECT_GT(within / nw, cross / nc);
  }
}

TEST(ConfidenceCsv, RoundTrip) {
  const auto table = parse_confidence_csv("a,b\n0.5,\n0.25,0.75\n");
  EXPECT_EQ(write_confidence_csv(parse_confidence_csv(write_confidence_csv(table))), write_confidence_csv(table));
  EXPECT_FALSE(table.rows[0][1].has_value());
}

TEST(Heatmap, SingleCell) {
  const auto svg = render_heatmap(SquareMatrix(1, 1.0), {"nose"}, {});
  EXPECT_EQ(count(svg, "class=\"cell\""), 1u);
  EXPECT_NE(svg.find(">nose<"), std::string::npos);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
}

TEST(Heatmap, IdentityDiagonalAtRampMaximum) {
  SquareMatrix id(3);
  for (std::size_t i = 0; i < 3; ++i) id(i, i) = 1.0;
  const auto svg = render_heatmap(id, {"a", "b", "c"}, {});
  EXPECT_EQ(count(svg, "class=\"cell\""), 9u);
  EXPECT_EQ(count(svg, "height=\"40\" fill=\"#b2182b\""), 3u);
  EXPECT_EQ(count(svg, "height=\"40\" fill=\"#ffffff\""), 6u);
  EXPECT_EQ(render_heatmap(id, {"a", "b", "c"}, {}), svg);
}

TEST(Heatmap, RejectsNonFinite) {
  SquareMatrix m(2);
  m(0, 1) = std::nan("");
  try {
    render_heatmap(m, {"a", "b"}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFinite);
  }
  m(0, 1) = INFINITY;
  EXPECT_THROW(render_heatmap(m, {"a", "b"}, {}), Error);
}

}  // namespace
}  // namespace keyshap
