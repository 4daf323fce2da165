#include "exthost/manifest_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace exthost {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidManifest, what); }

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

std::uint32_t get_u32(const json& j, const char* key) {
  auto v = get<std::int64_t>(j, key);
  if (v < 0 || v > 0xffffffffll) bad(std::string("field '") + key + "' out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

ExtensionManifest parse_manifest(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("manifest must be a JSON object");

  ExtensionManifest m;
  m.extension_id = get<std::string>(j, "extension_id");
  auto kind = get<std::string>(j, "program_kind");
  auto pk = parse_program_kind(kind);
  if (!pk) bad("unknown program_kind '" + kind + "'");
  m.program_kind = *pk;
  for (const auto& f : get_or<std::vector<std::string>>(j, "feature_flags", {})) m.feature_flags.insert(f);
  m.entry_symbol = get<std::string>(j, "entry_symbol");

  if (!j.contains("callgraph") || !j["callgraph"].is_object()) bad("missing object 'callgraph'");
  const auto& cg = j["callgraph"];
  if (!cg.contains("nodes") || !cg["nodes"].is_array()) bad("callgraph.nodes must be an array");
  for (const auto& n : cg["nodes"]) {
    CallNode node;
    node.function_id = get<std::string>(n, "function_id");
    auto frame = get<std::int64_t>(n, "frame_bytes");
    if (frame < 0) bad("function '" + node.function_id + "' has negative frame_bytes");
    node.frame_bytes = static_cast<std::uint64_t>(frame);
    node.calls_helper = get_or<bool>(n, "calls_helper", false);
    m.callgraph.nodes.push_back(std::move(node));
  }
  if (cg.contains("edges")) {
    if (!cg["edges"].is_array()) bad("callgraph.edges must be an array");
    for (const auto& e : cg["edges"]) {
      CallEdge edge;
      edge.caller = get<std::string>(e, "caller");
      auto k = get_or<std::string>(e, "kind", "direct");
      if (k == "direct")
        edge.kind = EdgeKind::Direct;
      else if (k == "indirect")
        edge.kind = EdgeKind::Indirect;
      else
        bad("unknown edge kind '" + k + "'");
      if (e.contains("callee") && e.contains("callees")) bad("edge has both 'callee' and 'callees'");
      if (e.contains("callee"))
        edge.callees.push_back(get<std::string>(e, "callee"));
      else if (e.contains("callees"))
        edge.callees = get<std::vector<std::string>>(e, "callees");
      else if (edge.kind == EdgeKind::Direct)
        bad("direct edge from '" + edge.caller + "' names no callee");
      m.callgraph.edges.push_back(std::move(edge));
    }
  }
  for (const auto& s : get_or<std::vector<json>>(j, "declared_maps", {})) {
    MapSpec spec;
    spec.map_id = get<std::string>(s, "map_id");
    auto mk = get<std::string>(s, "kind");
    auto kind_v = parse_map_kind(mk);
    if (!kind_v) bad("unknown map kind '" + mk + "'");
    spec.kind = *kind_v;
    spec.key_bytes = s.contains("key_bytes") ? get_u32(s, "key_bytes") : 4;
    spec.value_bytes = get_u32(s, "value_bytes");
    spec.max_entries = get_u32(s, "max_entries");
    spec.validate();
    m.declared_maps.push_back(std::move(spec));
  }
  m.validate();
  return m;
}

ExtensionManifest load_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string dump_manifest(const ExtensionManifest& m) {
  json j;
  j["extension_id"] = m.extension_id;
  j["program_kind"] = std::string(to_string(m.program_kind));
  j["feature_flags"] = std::vector<std::string>(m.feature_flags.begin(), m.feature_flags.end());
  j["entry_symbol"] = m.entry_symbol;
  json nodes = json::array(), edges = json::array();
  for (const auto& n : m.callgraph.nodes)
    nodes.push_back({{"function_id", n.function_id}, {"frame_bytes", n.frame_bytes}, {"calls_helper", n.calls_helper}});
  for (const auto& e : m.callgraph.edges) {
    json je{{"caller", e.caller}, {"kind", e.kind == EdgeKind::Direct ? "direct" : "indirect"}};
    if (e.kind == EdgeKind::Direct && e.callees.size() == 1)
      je["callee"] = e.callees.front();
    else
      je["callees"] = e.callees;
    edges.push_back(std::move(je));
  }
  j["callgraph"] = {{"nodes", nodes}, {"edges", edges}};
  json maps = json::array();
  for (const auto& s : m.declared_maps)
    maps.push_back({{"map_id", s.map_id}, {"kind", std::string(to_string(s.kind))}, {"key_bytes", s.key_bytes},
                    {"value_bytes", s.value_bytes}, {"max_entries", s.max_entries}});
  j["declared_maps"] = maps;
  return j.dump(2) + "\n";
}

}  // namespace exthost
