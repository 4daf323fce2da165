#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <optional>

#include "exthost/bmc.hpp"
#include "exthost/manifest_io.hpp"
#include "test_util.hpp"

using namespace exthost;
using namespace exthost::testing;

namespace {

std::optional<ErrorCode> parse_error(const std::string& text) {
  try {
    parse_manifest(text);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(ManifestIo, RoundTripsEveryField) {
  auto m = bmc::ingress_manifest({});
  m.feature_flags = {"simd", "unsafe-code"};
  m.callgraph.edges.push_back({"serve_hit", {"parse_headers", "extract_key"}, EdgeKind::Indirect});
  m.callgraph.edges.push_back({"extract_key", {}, EdgeKind::Indirect});
  m.declared_maps.push_back(hash_spec("h", 16, 32, 100));
  EXPECT_EQ(parse_manifest(dump_manifest(m)), m);

  auto t = simple_manifest("tr", {}, 128, ProgramKind::TraceEvent);
  EXPECT_EQ(parse_manifest(dump_manifest(t)), t);
}

TEST(ManifestIo, DefaultsForOptionalFields) {
  auto m = parse_manifest(R"({
    "extension_id": "x", "program_kind": "packet-ingress", "entry_symbol": "main",
    "callgraph": {"nodes": [{"function_id": "main", "frame_bytes": 64}, {"function_id": "f", "frame_bytes": 8}],
                  "edges": [{"caller": "main", "callee": "f"}]},
    "declared_maps": [{"map_id": "m", "kind": "array", "value_bytes": 8, "max_entries": 4}]
  })");
  EXPECT_TRUE(m.feature_flags.empty());
  ASSERT_EQ(m.callgraph.edges.size(), 1u);
  EXPECT_EQ(m.callgraph.edges[0].kind, EdgeKind::Direct);
  EXPECT_EQ(m.declared_maps[0].key_bytes, 4u);
  EXPECT_FALSE(m.callgraph.nodes[0].calls_helper);
}

TEST(ManifestIo, RejectsMalformedInput) {
  const std::string head = R"("extension_id": "x", "program_kind": "packet-ingress", "entry_symbol": "main")";
  const std::string node = R"({"function_id": "main", "frame_bytes": 64})";
  EXPECT_EQ(parse_error("{"), ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("[]"), ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + "}"), ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error(R"({"extension_id": "x", "program_kind": "xdp", "entry_symbol": "main",
                            "callgraph": {"nodes": [)" + node + "]}}"),
            ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + R"(, "callgraph": {"nodes": [{"function_id": "main", "frame_bytes": -1}]}})"),
            ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + R"(, "callgraph": {"nodes": [)" + node +
                        R"(], "edges": [{"caller": "main", "callee": "main", "callees": ["main"]}]}})"),
            ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + R"(, "callgraph": {"nodes": [)" + node +
                        R"(], "edges": [{"caller": "main", "callee": "ghost"}]}})"),
            ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + R"(, "callgraph": {"nodes": [)" + node +
                        R"(]}, "declared_maps": [{"map_id": "m", "kind": "tree", "value_bytes": 8, "max_entries": 1}]})"),
            ErrorCode::InvalidManifest);
  EXPECT_EQ(parse_error("{" + head + R"(, "callgraph": {"nodes": [)" + node + R"(]}})"), std::nullopt);
}

TEST(ManifestIo, LoadsFromFile) {
  auto path = std::filesystem::temp_directory_path() / "exthost_manifest_test.json";
  auto m = recursive_manifest("rec", 1024);
  std::ofstream(path) << dump_manifest(m);
  EXPECT_EQ(load_manifest_file(path), m);
  std::filesystem::remove(path);
  EXPECT_THROW(load_manifest_file(path), Error);
}
