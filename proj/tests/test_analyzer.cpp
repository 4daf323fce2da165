#include <gtest/gtest.h>

#include <random>

#include "exthost/analyzer.hpp"
#include "oracles.hpp"

using namespace exthost;
using namespace exthost::testing;

namespace {

CallGraph chain(std::initializer_list<std::pair<const char*, std::uint64_t>> fs) {
  CallGraph cg;
  const char* prev = nullptr;
  for (auto [id, frame] : fs) {
    cg.nodes.push_back({id, frame, false});
    if (prev) cg.edges.push_back({prev, {id}, EdgeKind::Direct});
    prev = id;
  }
  return cg;
}

ExtensionManifest with_flags(std::set<std::string> flags) {
  ExtensionManifest m;
  m.extension_id = "e";
  m.entry_symbol = "main";
  m.callgraph.nodes.push_back({"main", 0, false});
  m.feature_flags = std::move(flags);
  return m;
}

}  // namespace

TEST(Lint, EmptyFlagsAccepted) {
  auto r = lint_manifest(with_flags({}));
  EXPECT_TRUE(r.accepted());
  EXPECT_TRUE(r.violations.empty());
}

TEST(Lint, EachForbiddenFeatureNamed) {
  for (auto f : kForbiddenFeatures) {
    auto name = std::string(to_string(f));
    auto r = lint_manifest(with_flags({name}));
    ASSERT_FALSE(r.accepted()) << name;
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].feature, name);
  }
}

TEST(Lint, TwoViolations) {
  auto r = lint_manifest(with_flags({"simd", "floating-point"}));
  EXPECT_FALSE(r.accepted());
  ASSERT_EQ(r.violations.size(), 2u);
  EXPECT_EQ(r.violations[0].feature, "floating-point");
  EXPECT_EQ(r.violations[1].feature, "simd");
}

TEST(Lint, PermittedFlagsAndPurity) {
  auto m = with_flags({"loops", "mem-forget", "maps"});
  auto a = lint_manifest(m), b = lint_manifest(m);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.violations.size(), 1u);
  EXPECT_EQ(a.violations[0].feature, "mem-forget");
}

TEST(Stack, LinearChain) {
  HostConfig cfg;
  auto cg = chain({{"A", 512}, {"B", 256}, {"C", 128}});
  EXPECT_EQ(classify_stack_mode(cg, "A", cfg), StackMode(StaticallyBounded{896}));
}

TEST(Stack, SelfEdgeIsRuntimeChecked) {
  HostConfig cfg;
  CallGraph cg;
  cg.nodes.push_back({"A", 64, false});
  cg.edges.push_back({"A", {"A"}, EdgeKind::Direct});
  EXPECT_TRUE(is_runtime_checked(classify_stack_mode(cg, "A", cfg)));
}

TEST(Stack, IndirectEdgeIsRuntimeCheckedEvenWithTargets) {
  HostConfig cfg;
  auto cg = chain({{"A", 64}, {"B", 64}});
  cg.edges.push_back({"A", {"B"}, EdgeKind::Indirect});
  EXPECT_TRUE(is_runtime_checked(classify_stack_mode(cg, "A", cfg)));
  try {
    compute_static_bound(cg, "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndirectEdge);
  }
}

TEST(Stack, CycleHasNoStaticBound) {
  auto cg = chain({{"A", 1}, {"B", 1}});
  cg.edges.push_back({"B", {"A"}, EdgeKind::Direct});
  try {
    compute_static_bound(cg, "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CyclicGraph);
  }
}

TEST(Stack, Diamond) {
  CallGraph cg;
  cg.nodes = {{"A", 100, false}, {"B", 300, false}, {"C", 200, false}, {"D", 50, false}};
  cg.edges = {{"A", {"B"}, EdgeKind::Direct},
              {"A", {"C"}, EdgeKind::Direct},
              {"B", {"D"}, EdgeKind::Direct},
              {"C", {"D"}, EdgeKind::Direct}};
  EXPECT_EQ(compute_static_bound(cg, "A"), 450u);
}

TEST(Stack, SingleEmptyFrame) {
  CallGraph cg;
  cg.nodes = {{"A", 0, false}};
  EXPECT_EQ(compute_static_bound(cg, "A"), 0u);
}

TEST(Stack, BoundaryAtThresholdAccepted) {
  HostConfig cfg;
  auto cg = chain({{"A", 4096}, {"B", 4096}, {"C", 4096}, {"D", 4096}});
  EXPECT_EQ(compute_static_bound(cg, "A"), 16384u);
  EXPECT_EQ(classify_stack_mode(cg, "A", cfg), StackMode(StaticallyBounded{16384}));
  cg.nodes.push_back({"E", 1, false});
  cg.edges.push_back({"D", {"E"}, EdgeKind::Direct});
  try {
    classify_stack_mode(cg, "A", cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundExceeded);
  }
}

TEST(Stack, FrameLimits) {
  HostConfig cfg;
  EXPECT_FALSE(check_frame_limits(chain({{"A", 128}, {"B", 128}}), cfg));
  EXPECT_FALSE(check_frame_limits(chain({{"A", 4096}}), cfg));
  EXPECT_EQ(check_frame_limits(chain({{"A", 1}, {"B", 8192}, {"C", 9000}}), cfg), "B");
  try {
    classify_stack_mode(chain({{"A", 4097}}), "A", cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FrameTooLarge);
  }
}

TEST(Stack, UnreachableNodesIgnored) {
  auto cg = chain({{"A", 10}, {"B", 20}});
  cg.nodes.push_back({"dead", 4000, false});
  EXPECT_EQ(compute_static_bound(cg, "A"), 30u);
  EXPECT_EQ(unreachable_functions(cg, "A"), std::vector<std::string>{"dead"});
}

TEST(Stack, RandomDagsMatchEnumeration) {
  std::mt19937_64 rng(7);
  HostConfig cfg;
  for (int iter = 0; iter < 500; ++iter) {
    int n = 1 + static_cast<int>(rng() % 12);
    auto g = random_callgraph(rng, n, false, false);
    ASSERT_FALSE(brute_force_has_cycle(g.cg));
    auto expect = enumerate_max_path(g.cg, "f0");
    ASSERT_EQ(compute_static_bound(g.cg, "f0"), expect) << "iter " << iter;
    if (expect <= cfg.stack_threshold_bytes())
      ASSERT_EQ(classify_stack_mode(g.cg, "f0", cfg), StackMode(StaticallyBounded{expect}));
  }
}

TEST(Stack, RandomCyclicOrIndirectAreRuntimeChecked) {
  std::mt19937_64 rng(11);
  HostConfig cfg;
  for (int iter = 0; iter < 500; ++iter) {
    int n = 1 + static_cast<int>(rng() % 12);
    bool back = rng() % 2, ind = !back || rng() % 2;
    auto g = random_callgraph(rng, n, back, ind);
    const bool cyclic = brute_force_has_cycle(g.cg);
    ASSERT_EQ(has_cycle(g.cg), cyclic);
    if (!cyclic && !g.indirect) continue;  // a back edge that closes no cycle
    ASSERT_TRUE(is_runtime_checked(classify_stack_mode(g.cg, "f0", cfg))) << "iter " << iter;
  }
}
