#include <gtest/gtest.h>

#include "keyshap/error.hpp"
#include "keyshap/skeleton.hpp"
#include "support.hpp"

namespace keyshap {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(Skeleton, DefaultDocumentHasCocoShape) {
  const auto sk = load_schema_file(testing::source_dir() / "schemas" / "coco17.json");
  EXPECT_EQ(sk.size(), 17u);
  EXPECT_EQ(sk.edges().size(), 19u);
  EXPECT_EQ(sk.hash(), default_skeleton().hash());
  for (std::size_t i = 0; i < sk.size(); ++i) EXPECT_GE(sk.degree(i), 1u) << sk.schema().name(i);
}

TEST(Skeleton, FootAndShoulderAliasesResolve) {
  const auto& s = default_skeleton().schema();
  EXPECT_EQ(s.require_index("l-foot"), s.require_index("l-ankle"));
  EXPECT_EQ(s.require_index("r-foot"), s.require_index("r-ankle"));
  EXPECT_EQ(s.require_index("l-shd"), s.require_index("l-shoulder"));
  EXPECT_FALSE(s.index_of("tail").has_value());
}

TEST(Skeleton, ValidationErrors) {
  EXPECT_EQ(kind_of([] { load_schema(R"({"names":["nose","eye"],"edges":[["nose","nose"]]})"); }),
            ErrorKind::kSchemaValidation);
  EXPECT_EQ(kind_of([] { load_schema(R"({"names":["a","a"],"edges":[]})"); }),
            ErrorKind::kSchemaValidation);
  EXPECT_EQ(kind_of([] { load_schema(R"({"names":["a","b"],"edges":[["a","c"]]})"); }),
            ErrorKind::kSchemaValidation);
  EXPECT_EQ(kind_of([] { load_schema(R"({"names":["a","b"],"edges":[["a","b"],["b","a"]]})"); }),
            ErrorKind::kSchemaValidation);
  EXPECT_EQ(kind_of([] { load_schema(R"({"names":["a"],"edges":[]})"); }), ErrorKind::kSchemaValidation);
}

TEST(Skeleton, SelfLoopErrorNamesTheEntry) {
  try {
    load_schema(R"({"names":["nose","eye"],"edges":[["nose","nose"]]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("nose"), std::string::npos);
  }
}

TEST(Connectivity, TwoKeypoints) {
  const auto sk = load_schema(R"({"names":["a","b"],"edges":[["a","b"]]})");
  EXPECT_EQ(sk.degree(0), 1u);
  EXPECT_EQ(sk.degree(1), 1u);
  const auto kc = keypoint_connectivity(sk);
  EXPECT_DOUBLE_EQ(kc(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(kc(0, 0), 0.0);
}

TEST(Connectivity, CocoPairs) {
  const auto& sk = default_skeleton();
  const auto& s = sk.schema();
  const auto kc = keypoint_connectivity(sk);
  EXPECT_DOUBLE_EQ(kc(s.require_index("l-elbow"), s.require_index("l-wrist")), 0.75);
  EXPECT_DOUBLE_EQ(kc(s.require_index("nose"), s.require_index("l-ankle")), 0.0);
}

TEST(Connectivity, IsolatedKeypointIsNamed) {
  const auto sk = load_schema(R"({"names":["a","b","c"],"edges":[["a","b"]]})");
  try {
    keypoint_connectivity(sk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroDegree);
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos) << e.what();
  }
}

// Random connected-ish graphs: symmetry, range, support equals the edge set.
TEST(ConnectivityProperty, SymmetricBoundedSupportedOnEdges) {
  CounterRng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(14);
    const auto schema = testing::letters(n);
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 1; i < n; ++i) edges.emplace_back(schema.name(rng.below(i)), schema.name(i));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.15) {
          const bool dup = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
            return (e.first == schema.name(i) && e.second == schema.name(j)) ||
                   (e.first == schema.name(j) && e.second == schema.name(i));
          });
          if (!dup) edges.emplace_back(schema.name(i), schema.name(j));
        }
    const Skeleton sk(schema, edges);
    const auto kc = keypoint_connectivity(sk);
    EXPECT_TRUE(kc.is_symmetric(0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(kc(i, j), 0.0);
        EXPECT_LE(kc(i, j), 1.0);
        EXPECT_EQ(kc(i, j) > 0.0, sk.connected(i, j));
        row += sk.connected(i, j) ? 1.0 / static_cast<double>(sk.degree(i)) : 0.0;
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(Skeleton, JsonRoundTrip) {
  const auto& sk = default_skeleton();
  const auto again = load_schema(sk.to_json());
  EXPECT_EQ(again.hash(), sk.hash());
  EXPECT_EQ(again.schema(), sk.schema());
}

}  // namespace
}  // namespace keyshap
