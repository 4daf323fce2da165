#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exthost/host.hpp"

// Memcached cache extension: GET hits are answered from a cache map before
// the request reaches the server, SETs invalidate, and an egress program fills
// the cache from server replies.
namespace exthost::bmc {

inline constexpr std::uint16_t kMemcachedPort = 11211;
inline constexpr std::size_t kMaxKeyLen = 250;
inline constexpr std::size_t kEthLen = 14;
inline constexpr std::size_t kIpLen = 20;
inline constexpr std::size_t kUdpLen = 8;
inline constexpr std::size_t kMcHdrLen = 8;
inline constexpr std::size_t kPayloadOffset = kEthLen + kIpLen + kUdpLen + kMcHdrLen;

// Cache entry layout inside the map value.
inline constexpr std::size_t kEntryHeaderLen = 12;  // key_hash u32, key_len u16, data_len u16, valid u8, 3 reserved
inline constexpr std::size_t kEntryKeyOffset = kEntryHeaderLen;
inline constexpr std::size_t kEntryDataOffset = kEntryKeyOffset + kMaxKeyLen + 2;  // 264

enum Stat : std::size_t { GetRecv, SetRecv, Hit, Miss, Invalidation, Drop, kStatCount };

struct Stats {
  std::array<std::uint64_t, kStatCount> v{};
  std::uint64_t operator[](Stat s) const { return v[s]; }
  bool operator==(const Stats&) const = default;
};

std::string_view to_string(Stat s) noexcept;

struct Config {
  std::uint32_t cache_entries = 4096;
  std::uint32_t max_data = 1024;  // largest cached reply payload
  std::uint32_t hash_seed = 0;
  std::string map_prefix = "bmc";  // maps are <prefix>.cache and <prefix>.stats

  std::uint32_t entry_bytes() const noexcept { return kEntryDataOffset + max_data; }
  std::string cache_map() const { return map_prefix + ".cache"; }
  std::string stats_map() const { return map_prefix + ".stats"; }
  std::uint32_t slot_of(std::uint32_t key_hash) const noexcept { return key_hash % cache_entries; }
};

// ---- manifests and programs ------------------------------------------------

inline constexpr std::string_view kIngressSymbol = "bmc_ingress";
inline constexpr std::string_view kIngressFaultySymbol = "bmc_ingress_faulty";
inline constexpr std::string_view kEgressSymbol = "bmc_egress";

ExtensionManifest ingress_manifest(const Config& cfg, std::string extension_id = "bmc.ingress");
ExtensionManifest faulty_manifest(const Config& cfg, std::string extension_id = "bmc.faulty");
ExtensionManifest egress_manifest(const Config& cfg, std::string extension_id = "bmc.egress");

/// Registers the header and cache-entry layouts (idempotent).
void register_types(TypeRegistry& types);

EntryFn make_ingress(Host& host, const Config& cfg);
/// Same as make_ingress except that SET invalidation scans one byte past the
/// key window, so a SET with a maximal key panics with OutOfBounds.
EntryFn make_ingress_faulty(Host& host, const Config& cfg);
EntryFn make_egress(Host& host, const Config& cfg);

/// Sums the per-worker stats lanes of `cfg.stats_map()`.
Stats read_stats(Host& host, const Config& cfg);

// ---- frames ----------------------------------------------------------------

struct Endpoint {
  std::array<std::uint8_t, 6> mac{};
  std::uint32_t ip = 0;  // host order
  std::uint16_t port = 0;
};

Endpoint server_endpoint();
Endpoint client_endpoint(std::uint32_t n);

using Frame = std::vector<std::uint8_t>;

/// Ethernet + IPv4 + UDP + memcached UDP header + payload, src -> dst.
Frame build_frame(const Endpoint& src, const Endpoint& dst, std::uint16_t request_id,
                  std::span<const std::uint8_t> payload);
Frame build_get(const Endpoint& client, std::uint16_t request_id, std::string_view key);
Frame build_set(const Endpoint& client, std::uint16_t request_id, std::string_view key,
                std::uint32_t flags, std::string_view data);
/// The server's answer to `request` carrying `payload`.
Frame build_reply(std::span<const std::uint8_t> request, std::span<const std::uint8_t> payload);

/// "VALUE <key> <flags> <bytes>\r\n<data>\r\nEND\r\n"
std::string encode_value_reply(std::string_view key, std::uint32_t flags, std::string_view data);

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) noexcept;

// ---- requests, reference server, workloads ---------------------------------

enum class Op { Get, Set };

struct Request {
  Op op = Op::Get;
  std::string key;
  std::uint32_t flags = 0;
  std::string data;  // SET only
  std::uint32_t client = 0;
  std::uint16_t request_id = 0;

  Frame encode() const;
  bool operator==(const Request&) const = default;
};

/// Host-side parse of a request frame (what the server would see).
std::optional<Request> parse_request(std::span<const std::uint8_t> frame);

/// Stand-in for the Memcached server, sharded by key.
class RefStore {
 public:
  explicit RefStore(std::size_t shards = 16);

  /// Reply payload for a request frame: "VALUE ...END\r\n" or "END\r\n" for
  /// GET, "STORED\r\n" for SET. nullopt for anything unparseable.
  std::optional<std::string> handle(std::span<const std::uint8_t> frame);
  std::optional<std::pair<std::uint32_t, std::string>> get(const std::string& key) const;
  void set(const std::string& key, std::uint32_t flags, std::string data);
  std::size_t size() const;

 private:
  struct Shard {
    mutable std::mutex mu;
    std::map<std::string, std::pair<std::uint32_t, std::string>> items;
  };
  Shard& shard_for(const std::string& key) const;
  std::vector<std::unique_ptr<Shard>> shards_;
};

struct WorkloadSpec {
  std::uint32_t keys = 1000;
  double get_ratio = 0.9;
  std::uint64_t seed = 1;
  std::uint64_t count = 10000;
  std::uint32_t min_value = 1;
  std::uint32_t max_value = 1100;
  /// Fraction of SETs that use a maximal (250-byte) key.
  double max_key_set_ratio = 0.0;
  std::uint32_t clients = 64;
};

/// The i-th key of a key space: "k<i>:" padded to a length between 6 and 250
/// derived from the seed. Keys whose length is 250 exist in every large space.
std::string workload_key(std::uint64_t seed, std::uint32_t i);
std::string max_length_key(std::uint32_t i);
std::vector<Request> generate_workload(const WorkloadSpec& spec);

// Trace file: a flat sequence of frames, each a u32 little-endian length
// followed by that many bytes.
void write_trace(const std::filesystem::path& path, const std::vector<Frame>& frames);
std::vector<Frame> read_trace(const std::filesystem::path& path);

// ---- harness ---------------------------------------------------------------

struct Served {
  Verdict verdict;
  bool panicked = false;
  bool from_cache = false;
  Frame reply;  // what the client receives (empty if nothing)
};

/// Drives the cache extensions and the reference server for one host. The
/// egress program sees every server reply to a GET.
class Rig {
 public:
  Rig(Host& host, Config cfg, bool faulty_ingress = false);

  const Config& config() const noexcept { return cfg_; }
  RefStore& store() noexcept { return store_; }
  const ExtensionHandle& ingress() const noexcept { return ingress_; }
  const ExtensionHandle& egress() const noexcept { return egress_; }
  /// Reloads the programs after a crash-stop removed them.
  void reload();
  bool loaded() const;

  Served serve(unsigned worker, std::span<const std::uint8_t> frame, PacketBuffer& buf);

 private:
  Host& host_;
  Config cfg_;
  bool faulty_;
  RefStore store_;
  ExtensionHandle ingress_;
  ExtensionHandle egress_;
};

}  // namespace exthost::bmc
