#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "exthost/types.hpp"

namespace exthost {

/// JSON manifest codec. The format is described by docs/manifest.schema.json.
/// Parse errors and structural problems throw Error(InvalidManifest).
ExtensionManifest parse_manifest(std::string_view json_text);
ExtensionManifest load_manifest_file(const std::filesystem::path& path);
std::string dump_manifest(const ExtensionManifest& manifest);

}  // namespace exthost
