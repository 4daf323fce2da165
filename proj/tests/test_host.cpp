#include <gtest/gtest.h>

#include <random>

#include "exthost/env.hpp"
#include "exthost/host.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace exthost;
using namespace exthost::testing;

namespace {

Verdict pass_entry(Env&, ProgramContext&) { return Verdict::pass(); }

ErrorCode load_error(Host& host, const ExtensionManifest& m) {
  try {
    host.load_extension(m, pass_entry);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(Load, HandleCarriesMapsAndMode) {
  Host host;
  auto h = host.load_extension(simple_manifest("e", {array_spec("m1"), hash_spec("m2")}), pass_entry);
  EXPECT_EQ(h.extension_id(), "e");
  EXPECT_EQ(h.attached_maps(), (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(h.stack_mode(), StackMode(StaticallyBounded{64}));
  EXPECT_EQ(host.map_ids(), (std::vector<std::string>{"m1", "m2"}));
}

TEST(Load, Errors) {
  Host host;
  auto flagged = simple_manifest("bad");
  flagged.feature_flags = {"unsafe-code"};
  EXPECT_EQ(load_error(host, flagged), ErrorCode::LintRejected);
  try {
    host.load_extension(flagged, pass_entry);
  } catch (const LintRejectedError& e) {
    EXPECT_EQ(e.report().violations.at(0).feature, "unsafe-code");
  }
  EXPECT_EQ(load_error(host, simple_manifest("big", {}, 8192)), ErrorCode::FrameTooLarge);

  auto deep = simple_manifest("deep", {}, 4096);
  for (int i = 0; i < 4; ++i) {
    deep.callgraph.nodes.push_back({"f" + std::to_string(i), 4096, false});
    deep.callgraph.edges.push_back({i == 0 ? "main" : "f" + std::to_string(i - 1), {"f" + std::to_string(i)}, EdgeKind::Direct});
  }
  EXPECT_EQ(load_error(host, deep), ErrorCode::BoundExceeded);

  host.load_extension(simple_manifest("e1", {hash_spec("cache", 4, 8)}), pass_entry);
  EXPECT_EQ(load_error(host, simple_manifest("e1")), ErrorCode::DuplicateId);
  EXPECT_EQ(load_error(host, simple_manifest("e2", {hash_spec("cache", 4, 16)})), ErrorCode::MapTypeMismatch);
  EXPECT_FALSE(host.find_extension("e2"));

  auto noentry = simple_manifest("ne");
  noentry.entry_symbol = "missing";
  EXPECT_EQ(load_error(host, noentry), ErrorCode::InvalidManifest);
  EXPECT_EQ(host.extension_ids(), std::vector<std::string>{"e1"});
}

TEST(Load, SharedMapIsBoundNotRecreated) {
  Host host;
  auto a = host.load_extension(simple_manifest("a", {array_spec("m")}), pass_entry);
  host.find_map("m")->update(0, Map::index_key(0), std::vector<std::uint8_t>(8, 5));
  auto b = host.load_extension(simple_manifest("b", {array_spec("m")}), pass_entry);
  EXPECT_EQ((*host.find_map("m")->get(0, 0u))[0], 5);
}

TEST(Load, UnreachableFunctionWarns) {
  Host host;
  auto m = simple_manifest("w");
  m.callgraph.nodes.push_back({"dead", 4000, false});
  auto h = host.load_extension(m, pass_entry);
  EXPECT_EQ(h.stack_mode(), StackMode(StaticallyBounded{64}));
  ASSERT_EQ(h.record().warnings().size(), 1u);
}

TEST(Unload, SingleAndUnknown) {
  Host host;
  host.load_extension(simple_manifest("e1", {array_spec("m")}), pass_entry);
  EXPECT_EQ(host.unload_extension("e1", true), std::vector<std::string>{"e1"});
  EXPECT_TRUE(host.map_ids().empty());
  try {
    host.unload_extension("e1", false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownExtension);
  }
}

TEST(Unload, CascadeChain) {
  Host host;
  host.load_extension(simple_manifest("E1", {array_spec("M1")}), pass_entry);
  host.load_extension(simple_manifest("E2", {array_spec("M1"), array_spec("M2")}), pass_entry);
  host.load_extension(simple_manifest("E3", {array_spec("M2")}), pass_entry);
  host.load_extension(simple_manifest("E4", {array_spec("M9")}), pass_entry);
  EXPECT_EQ(host.unload_extension("E1", true), (std::vector<std::string>{"E1", "E2", "E3"}));
  EXPECT_EQ(host.extension_ids(), std::vector<std::string>{"E4"});
  EXPECT_EQ(host.map_ids(), std::vector<std::string>{"M9"});
}

TEST(Unload, NonCascadeKeepsSharedMap) {
  Host host;
  host.load_extension(simple_manifest("E1", {array_spec("M")}), pass_entry);
  host.load_extension(simple_manifest("E2", {array_spec("M")}), pass_entry);
  EXPECT_EQ(host.unload_extension("E1", false), std::vector<std::string>{"E1"});
  EXPECT_EQ(host.map_ids(), std::vector<std::string>{"M"});
}

TEST(Unload, RoundTripRestoresTables) {
  Host host;
  host.load_extension(simple_manifest("base", {array_spec("B")}), pass_entry);
  auto exts = host.extension_ids();
  auto maps = host.map_ids();
  host.load_extension(simple_manifest("tmp", {array_spec("T"), hash_spec("H")}), pass_entry);
  host.unload_extension("tmp", false);
  EXPECT_EQ(host.extension_ids(), exts);
  EXPECT_EQ(host.map_ids(), maps);
}

TEST(Unload, StaleHandleCannotDispatch) {
  Host host;
  auto h = host.load_extension(simple_manifest("e"), pass_entry);
  host.unload_extension("e", false);
  ProgramContext ctx;
  try {
    host.dispatch(0, h, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownExtension);
  }
}

TEST(Unload, RandomTopologiesMatchComponentOracle) {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    Host host;
    std::map<std::string, std::vector<std::string>> ext_maps;
    int n = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < n; ++e) {
      std::vector<MapSpec> specs;
      std::vector<std::string> ids;
      for (int m = 0; m < 6; ++m)
        if (rng() % 4 == 0) {
          specs.push_back(array_spec("M" + std::to_string(m)));
          ids.push_back("M" + std::to_string(m));
        }
      auto id = "E" + std::to_string(e);
      host.load_extension(simple_manifest(id, specs), pass_entry);
      ext_maps[id] = ids;
    }
    auto start = "E" + std::to_string(rng() % n);
    auto removed = host.unload_extension(start, true);
    ASSERT_EQ(removed.front(), start);
    std::set<std::string> got(removed.begin(), removed.end());
    ASSERT_EQ(got.size(), removed.size());
    ASSERT_EQ(got, sharing_component(ext_maps, start)) << "iter " << iter;
    for (const auto& id : host.extension_ids()) ASSERT_FALSE(got.count(id));
  }
}

TEST(Unload, WorkerBusyAndNested) {
  Host host;
  ExtensionHandle self;
  std::optional<ErrorCode> inner;
  auto h = host.load_extension(simple_manifest("nest"), [&](Env&, ProgramContext& ctx) {
    try {
      host.dispatch(0, self, ctx);
    } catch (const Error& e) {
      inner = e.code();
    }
    return Verdict::pass();
  });
  self = h;
  ProgramContext ctx;
  host.dispatch(0, h, ctx);
  EXPECT_EQ(inner, ErrorCode::WorkerBusy);
}
