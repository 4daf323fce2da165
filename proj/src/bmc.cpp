#include "exthost/bmc.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "exthost/env.hpp"

namespace exthost::bmc {

std::string_view to_string(Stat s) noexcept {
  switch (s) {
    case GetRecv: return "get_recv";
    case SetRecv: return "set_recv";
    case Hit: return "hit";
    case Miss: return "miss";
    case Invalidation: return "invalidation";
    case Drop: return "drop";
    case kStatCount: break;
  }
  return "?";
}

namespace {

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint8_t kProtoUdp = 17;

constexpr std::uint16_t bswap16(std::uint16_t v) noexcept {
  return static_cast<std::uint16_t>((v >> 8) | (v << 8));
}

struct Descs {
  const TypeDescriptor* eth;
  const TypeDescriptor* ip;
  const TypeDescriptor* udp;
  const TypeDescriptor* mc;
  const TypeDescriptor* entry;
  const TypeDescriptor* stats;
};

// Field indices, in registration order.
enum EthField : std::size_t { EthDstHi, EthDstLo, EthSrcHi, EthSrcLo, EthType };
enum IpField : std::size_t { IpVerIhl, IpTos, IpTotalLen, IpId, IpFrag, IpTtl, IpProto, IpCsum, IpSaddr, IpDaddr };
enum UdpField : std::size_t { UdpSport, UdpDport, UdpLen, UdpCsum };
enum McField : std::size_t { McRequestId, McSeq, McCount, McReserved };
enum EntryField : std::size_t { EntryHash, EntryKeyLen, EntryDataLen, EntryValid, EntryReserved };

void register_if_absent(TypeRegistry& types, const std::string& id, std::vector<FieldSpec> fields,
                        std::size_t total) {
  if (types.find(id)) return;
  try {
    types.register_type(id, std::move(fields), total);
  } catch (const Error&) {
    if (!types.find(id)) throw;  // lost a registration race otherwise
  }
}

Descs descriptors(TypeRegistry& types) {
  register_types(types);
  return {types.find("bmc.eth"), types.find("bmc.ipv4"), types.find("bmc.udp"),
          types.find("bmc.memcached_udp"), types.find("bmc.cache_entry"), types.find("bmc.stats")};
}

ExtensionManifest base_manifest(const Config& cfg, std::string id, std::string_view entry,
                                bool ingress) {
  ExtensionManifest m;
  m.extension_id = std::move(id);
  m.program_kind = ProgramKind::PacketIngress;
  m.entry_symbol = std::string(entry);
  auto& n = m.callgraph.nodes;
  auto& e = m.callgraph.edges;
  n.push_back({m.entry_symbol, 384, true});
  n.push_back({"parse_headers", 256, false});
  n.push_back({"extract_key", 128, false});
  auto edge = [&](const std::string& a, const std::string& b) { e.push_back({a, {b}, EdgeKind::Direct}); };
  edge(m.entry_symbol, "parse_headers");
  if (ingress) {
    n.push_back({"serve_hit", 512, true});
    n.push_back({"invalidate_cache", 256, true});
    edge(m.entry_symbol, "extract_key");
    edge(m.entry_symbol, "serve_hit");
    edge(m.entry_symbol, "invalidate_cache");
    edge("invalidate_cache", "extract_key");
  } else {
    n.push_back({"fill_cache", 384, true});
    edge(m.entry_symbol, "fill_cache");
    edge("fill_cache", "extract_key");
  }
  m.declared_maps.push_back({cfg.cache_map(), MapKind::Array, 4, cfg.entry_bytes(), cfg.cache_entries});
  if (ingress)
    m.declared_maps.push_back({cfg.stats_map(), MapKind::PerWorker, 4,
                               static_cast<std::uint32_t>(8 * kStatCount), 1});
  return m;
}

enum class Parse { Other, Malformed, Memcached };

// Validates eth/ip/udp and yields the memcached payload (after the 8-byte
// frame header). `port_field` selects which UDP port must be 11211.
Parse parse_headers(Env& env, const Descs& d, BoundedView pkt, std::size_t port_field,
                    BoundedView& payload) {
  if (pkt.size() < kEthLen) return Parse::Malformed;
  auto eth = env.transmute(pkt, *d.eth);
  if (bswap16(static_cast<std::uint16_t>(eth.get_unsigned(EthType))) != kEtherIpv4) return Parse::Other;
  if (pkt.size() < kEthLen + kIpLen) return Parse::Malformed;
  auto ip = env.transmute(pkt.tail(kEthLen), *d.ip);
  if (ip.get_unsigned(IpVerIhl) != 0x45 || ip.get_unsigned(IpProto) != kProtoUdp) return Parse::Other;
  if (pkt.size() < kEthLen + kIpLen + kUdpLen) return Parse::Malformed;
  auto udp = env.transmute(pkt.tail(kEthLen + kIpLen), *d.udp);
  if (bswap16(static_cast<std::uint16_t>(udp.get_unsigned(port_field))) != kMemcachedPort)
    return Parse::Other;
  const std::size_t total = bswap16(static_cast<std::uint16_t>(ip.get_unsigned(IpTotalLen)));
  const std::size_t udp_len = bswap16(static_cast<std::uint16_t>(udp.get_unsigned(UdpLen)));
  if (total < kIpLen + kUdpLen + kMcHdrLen || total > pkt.size() - kEthLen) return Parse::Malformed;
  if (udp_len < kUdpLen + kMcHdrLen || udp_len > total - kIpLen) return Parse::Malformed;
  payload = pkt.subview(kPayloadOffset, udp_len - kUdpLen - kMcHdrLen);
  return Parse::Memcached;
}

// Length of the key starting at `start`, which must be followed by
// `terminator`. 0 if there is no valid key.
std::size_t key_length(BoundedView payload, std::size_t start, std::uint8_t terminator) {
  if (payload.size() <= start) return 0;
  auto window = payload.subview(start, std::min(payload.size() - start, kMaxKeyLen));
  std::size_t i = 0;
  while (i < window.size()) {
    auto c = window.at(i);
    if (c == ' ' || c == '\r' || c == '\n') break;
    ++i;
  }
  if (i == 0 || !payload.contains(start + i, 1) || payload.at(start + i) != terminator) return 0;
  return i;
}

// The faulty scan: `<=` lets it step one byte past a window that holds no
// terminator, which is exactly the case of a maximal key.
std::size_t key_length_faulty(BoundedView payload, std::size_t start, std::uint8_t terminator) {
  if (payload.size() <= start) return 0;
  auto window = payload.subview(start, std::min(payload.size() - start, kMaxKeyLen));
  std::size_t i = 0;
  for (; i <= window.size(); ++i) {
    auto c = window.at(i);
    if (c == ' ' || c == '\r' || c == '\n') break;
  }
  if (i == 0 || payload.at(start + i) != terminator) return 0;
  return i;
}

struct Counters {
  TypedRecord rec;
  void bump(Stat s) const { rec.set(s, rec.get_unsigned(s) + 1); }
};

bool entry_matches(Env& env, const Descs& d, BoundedView entry, std::uint32_t hash,
                   std::span<const std::uint8_t> key) {
  auto hdr = env.transmute(entry, *d.entry);
  return hdr.get_unsigned(EntryValid) != 0 && hdr.get_unsigned(EntryHash) == hash &&
         hdr.get_unsigned(EntryKeyLen) == key.size() &&
         entry.subview(kEntryKeyOffset, key.size()).equals(key);
}

void swap_bytes(BoundedView v, std::size_t a, std::size_t b, std::size_t n) {
  std::array<std::uint8_t, 6> x{}, y{};
  v.read_into(a, std::span(x.data(), n));
  v.read_into(b, std::span(y.data(), n));
  v.write(a, std::span<const std::uint8_t>(y.data(), n));
  v.write(b, std::span<const std::uint8_t>(x.data(), n));
}

// Turns the request in `pkt` into a reply of `data_len` payload bytes.
void rewrite_as_reply(Env& env, const Descs& d, BoundedView pkt, std::size_t data_len) {
  swap_bytes(pkt, 0, 6, 6);
  auto ipv = pkt.subview(kEthLen, kIpLen);
  auto ip = env.transmute(ipv, *d.ip);
  const auto saddr = ip.get_unsigned(IpSaddr);
  ip.set(IpSaddr, ip.get_unsigned(IpDaddr));
  ip.set(IpDaddr, saddr);
  ip.set(IpTotalLen, bswap16(static_cast<std::uint16_t>(kIpLen + kUdpLen + kMcHdrLen + data_len)));
  ip.set(IpCsum, 0);
  ip.set(IpCsum, bswap16(ipv4_checksum(ipv.read(0, kIpLen))));
  auto udp = env.transmute(pkt.tail(kEthLen + kIpLen), *d.udp);
  const auto sport = udp.get_unsigned(UdpSport);
  udp.set(UdpSport, udp.get_unsigned(UdpDport));
  udp.set(UdpDport, sport);
  udp.set(UdpLen, bswap16(static_cast<std::uint16_t>(kUdpLen + kMcHdrLen + data_len)));
  udp.set(UdpCsum, 0);
  auto mc = env.transmute(pkt.tail(kEthLen + kIpLen + kUdpLen), *d.mc);
  mc.set(McSeq, 0);
  mc.set(McCount, bswap16(1));
  mc.set(McReserved, 0);
}

Verdict serve_get(Env& env, const Descs& d, const Config& cfg, BoundedView pkt, BoundedView payload,
                  const Counters& c) {
  c.bump(GetRecv);
  const auto len = key_length(payload, 4, '\r');
  if (len == 0) {
    c.bump(Drop);
    return Verdict::pass();
  }
  const auto key = payload.read(4, len);
  const auto hash = fnv1a32(key, cfg.hash_seed);
  const auto slot = cfg.slot_of(hash);
  Map& cache = env.map(0);
  auto ref = env.map_lookup(cache, slot);
  if (!ref) {
    c.bump(Miss);
    return Verdict::pass();
  }
  auto guard = env.spin_lock(*cache.entry_lock(slot));
  const auto entry = ref->bytes();
  if (!entry_matches(env, d, entry, hash, key)) {
    c.bump(Miss);
    return Verdict::pass();
  }
  const std::size_t data_len = env.transmute(entry, *d.entry).get_unsigned(EntryDataLen);
  const auto delta = static_cast<std::ptrdiff_t>(kPayloadOffset + data_len) -
                     static_cast<std::ptrdiff_t>(pkt.size());
  if (data_len > cfg.max_data || !env.adjust_tail(delta)) {
    c.bump(Miss);
    return Verdict::pass();
  }
  pkt = env.packet();
  pkt.write(kPayloadOffset, entry.read(kEntryDataOffset, data_len));
  rewrite_as_reply(env, d, pkt, data_len);
  c.bump(Hit);
  return Verdict::tx();
}

Verdict invalidate_cache(Env& env, const Descs& d, const Config& cfg, BoundedView payload,
                         const Counters& c, bool faulty) {
  c.bump(SetRecv);
  const auto len = faulty ? key_length_faulty(payload, 4, ' ') : key_length(payload, 4, ' ');
  if (len == 0) {
    c.bump(Drop);
    return Verdict::pass();
  }
  const auto key = payload.read(4, len);
  const auto hash = fnv1a32(key, cfg.hash_seed);
  const auto slot = cfg.slot_of(hash);
  Map& cache = env.map(0);
  auto ref = env.map_lookup(cache, slot);
  if (!ref) return Verdict::pass();
  auto guard = env.spin_lock(*cache.entry_lock(slot));
  if (entry_matches(env, d, ref->bytes(), hash, key)) {
    env.transmute(ref->bytes(), *d.entry).set(EntryValid, 0);
    c.bump(Invalidation);
  }
  return Verdict::pass();
}

Verdict ingress(Env& env, const Descs& d, const Config& cfg, bool faulty) {
  auto stats = env.map_lookup(env.map(1), 0u);
  if (!stats) return Verdict::pass();
  const Counters c{env.transmute(stats->bytes(), *d.stats)};
  const auto pkt = env.packet();
  BoundedView payload;
  switch (parse_headers(env, d, pkt, UdpDport, payload)) {
    case Parse::Other: return Verdict::pass();
    case Parse::Malformed: c.bump(Drop); return Verdict::pass();
    case Parse::Memcached: break;
  }
  if (payload.starts_with("get ")) return serve_get(env, d, cfg, pkt, payload, c);
  if (payload.starts_with("set ")) return invalidate_cache(env, d, cfg, payload, c, faulty);
  return Verdict::pass();
}

Verdict egress(Env& env, const Descs& d, const Config& cfg) {
  const auto pkt = env.packet();
  BoundedView payload;
  if (parse_headers(env, d, pkt, UdpSport, payload) != Parse::Memcached) return Verdict::pass();
  constexpr std::string_view kPrefix = "VALUE ", kEnd = "\r\nEND\r\n";
  if (!payload.starts_with(kPrefix) || payload.size() > cfg.max_data || payload.size() < kEnd.size())
    return Verdict::pass();
  if (payload.tail(payload.size() - kEnd.size()).as_chars() != kEnd) return Verdict::pass();
  const auto len = key_length(payload, kPrefix.size(), ' ');
  if (len == 0) return Verdict::pass();
  const auto key = payload.read(kPrefix.size(), len);
  const auto hash = fnv1a32(key, cfg.hash_seed);
  const auto slot = cfg.slot_of(hash);
  Map& cache = env.map(0);
  auto ref = env.map_lookup(cache, slot);
  if (!ref) return Verdict::pass();
  auto guard = env.spin_lock(*cache.entry_lock(slot));
  const auto entry = ref->bytes();
  auto hdr = env.transmute(entry, *d.entry);
  entry.write(kEntryKeyOffset, key);
  entry.write(kEntryDataOffset, payload.read(0, payload.size()));
  hdr.set(EntryHash, hash);
  hdr.set(EntryKeyLen, len);
  hdr.set(EntryDataLen, payload.size());
  hdr.set(EntryValid, 1);
  return Verdict::pass();
}

void put_be16(Frame& f, std::size_t at, std::uint16_t v) {
  f[at] = static_cast<std::uint8_t>(v >> 8);
  f[at + 1] = static_cast<std::uint8_t>(v);
}
void put_be32(Frame& f, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) f[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}
std::uint16_t be16_at(std::span<const std::uint8_t> f, std::size_t at) {
  return static_cast<std::uint16_t>(f[at] << 8 | f[at + 1]);
}
std::uint32_t be32_at(std::span<const std::uint8_t> f, std::size_t at) {
  return std::uint32_t{f[at]} << 24 | std::uint32_t{f[at + 1]} << 16 | std::uint32_t{f[at + 2]} << 8 | f[at + 3];
}

std::span<const std::uint8_t> bytes_of(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Payload of a well-formed memcached frame, host-side.
std::optional<std::string_view> frame_payload(std::span<const std::uint8_t> f) {
  if (f.size() < kPayloadOffset || be16_at(f, 12) != kEtherIpv4 || f[14] != 0x45 || f[23] != kProtoUdp)
    return std::nullopt;
  const std::size_t total = be16_at(f, 16), udp_len = be16_at(f, 38);
  if (total < kIpLen + kUdpLen + kMcHdrLen || total > f.size() - kEthLen) return std::nullopt;
  if (udp_len < kUdpLen + kMcHdrLen || udp_len > total - kIpLen) return std::nullopt;
  return std::string_view(reinterpret_cast<const char*>(f.data()) + kPayloadOffset,
                          udp_len - kUdpLen - kMcHdrLen);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string padded_key(std::string prefix, std::size_t len, std::uint64_t salt) {
  for (std::size_t j = prefix.size(); j < len; ++j)
    prefix.push_back(static_cast<char>('a' + (salt + j * 7) % 26));
  return prefix;
}

}  // namespace

// ---- types, manifests, programs ----------------------------------------------

void register_types(TypeRegistry& types) {
  register_if_absent(types, "bmc.eth",
                     {{"dst_hi", 0, 4, "u32"}, {"dst_lo", 4, 2, "u16"}, {"src_hi", 6, 4, "u32"},
                      {"src_lo", 10, 2, "u16"}, {"ethertype", 12, 2, "u16"}},
                     kEthLen);
  register_if_absent(types, "bmc.ipv4",
                     {{"ver_ihl", 0, 1, "u8"}, {"tos", 1, 1, "u8"}, {"total_len", 2, 2, "u16"},
                      {"id", 4, 2, "u16"}, {"frag", 6, 2, "u16"}, {"ttl", 8, 1, "u8"},
                      {"proto", 9, 1, "u8"}, {"csum", 10, 2, "u16"}, {"saddr", 12, 4, "u32"},
                      {"daddr", 16, 4, "u32"}},
                     kIpLen);
  register_if_absent(types, "bmc.udp",
                     {{"sport", 0, 2, "u16"}, {"dport", 2, 2, "u16"}, {"len", 4, 2, "u16"},
                      {"csum", 6, 2, "u16"}},
                     kUdpLen);
  register_if_absent(types, "bmc.memcached_udp",
                     {{"request_id", 0, 2, "u16"}, {"seq", 2, 2, "u16"}, {"count", 4, 2, "u16"},
                      {"reserved", 6, 2, "u16"}},
                     kMcHdrLen);
  register_if_absent(types, "bmc.cache_entry",
                     {{"key_hash", 0, 4, "u32"}, {"key_len", 4, 2, "u16"}, {"data_len", 6, 2, "u16"},
                      {"valid", 8, 1, "u8"}, {"pad", 9, 3, "reserved"}},
                     kEntryHeaderLen);
  std::vector<FieldSpec> stats;
  for (std::size_t i = 0; i < kStatCount; ++i)
    stats.push_back({std::string(to_string(static_cast<Stat>(i))), 8 * i, 8, "u64"});
  register_if_absent(types, "bmc.stats", std::move(stats), 8 * kStatCount);
}

ExtensionManifest ingress_manifest(const Config& cfg, std::string extension_id) {
  return base_manifest(cfg, std::move(extension_id), kIngressSymbol, true);
}
ExtensionManifest faulty_manifest(const Config& cfg, std::string extension_id) {
  return base_manifest(cfg, std::move(extension_id), kIngressFaultySymbol, true);
}
ExtensionManifest egress_manifest(const Config& cfg, std::string extension_id) {
  return base_manifest(cfg, std::move(extension_id), kEgressSymbol, false);
}

EntryFn make_ingress(Host& host, const Config& cfg) {
  return [d = descriptors(host.types()), cfg](Env& env, ProgramContext&) { return ingress(env, d, cfg, false); };
}
EntryFn make_ingress_faulty(Host& host, const Config& cfg) {
  return [d = descriptors(host.types()), cfg](Env& env, ProgramContext&) { return ingress(env, d, cfg, true); };
}
EntryFn make_egress(Host& host, const Config& cfg) {
  return [d = descriptors(host.types()), cfg](Env& env, ProgramContext&) { return egress(env, d, cfg); };
}

Stats read_stats(Host& host, const Config& cfg) {
  Stats s;
  auto map = host.find_map(cfg.stats_map());
  if (!map) return s;
  for (unsigned w = 0; w < host.num_workers(); ++w) {
    auto v = map->get(w, 0u);
    if (!v) continue;
    for (std::size_t i = 0; i < kStatCount; ++i) {
      std::uint64_t x;
      std::memcpy(&x, v->data() + 8 * i, 8);
      s.v[i] += x;
    }
  }
  return s;
}

// ---- frames ---------------------------------------------------------------

Endpoint server_endpoint() { return {{0x02, 0, 0, 0, 0, 0x01}, 0x0a000001u, kMemcachedPort}; }

Endpoint client_endpoint(std::uint32_t n) {
  n &= 0xffff;
  return {{0x02, 0, 0, 0x01, static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)},
          0x0a010000u | n, static_cast<std::uint16_t>(40000 + n % 20000)};
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> h) noexcept {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < h.size(); i += 2) sum += static_cast<std::uint32_t>(h[i] << 8 | h[i + 1]);
  if (h.size() % 2) sum += static_cast<std::uint32_t>(h.back() << 8);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

Frame build_frame(const Endpoint& src, const Endpoint& dst, std::uint16_t request_id,
                  std::span<const std::uint8_t> payload) {
  Frame f(kPayloadOffset + payload.size(), 0);
  std::copy(dst.mac.begin(), dst.mac.end(), f.begin());
  std::copy(src.mac.begin(), src.mac.end(), f.begin() + 6);
  put_be16(f, 12, kEtherIpv4);
  f[14] = 0x45;
  put_be16(f, 16, static_cast<std::uint16_t>(kIpLen + kUdpLen + kMcHdrLen + payload.size()));
  put_be16(f, 18, request_id);
  put_be16(f, 20, 0x4000);
  f[22] = 64;
  f[23] = kProtoUdp;
  put_be32(f, 26, src.ip);
  put_be32(f, 30, dst.ip);
  put_be16(f, 24, ipv4_checksum(std::span(f).subspan(kEthLen, kIpLen)));
  put_be16(f, 34, src.port);
  put_be16(f, 36, dst.port);
  put_be16(f, 38, static_cast<std::uint16_t>(kUdpLen + kMcHdrLen + payload.size()));
  put_be16(f, 42, request_id);
  put_be16(f, 46, 1);
  std::copy(payload.begin(), payload.end(), f.begin() + kPayloadOffset);
  return f;
}

Frame build_get(const Endpoint& client, std::uint16_t request_id, std::string_view key) {
  std::string p = "get ";
  p.append(key).append("\r\n");
  return build_frame(client, server_endpoint(), request_id, bytes_of(p));
}

Frame build_set(const Endpoint& client, std::uint16_t request_id, std::string_view key,
                std::uint32_t flags, std::string_view data) {
  std::string p = "set ";
  p.append(key).append(" ").append(std::to_string(flags)).append(" 0 ");
  p.append(std::to_string(data.size())).append("\r\n").append(data).append("\r\n");
  return build_frame(client, server_endpoint(), request_id, bytes_of(p));
}

Frame build_reply(std::span<const std::uint8_t> request, std::span<const std::uint8_t> payload) {
  if (request.size() < kPayloadOffset) throw std::invalid_argument("request frame too short");
  Endpoint client, server;
  std::copy(request.begin() + 6, request.begin() + 12, client.mac.begin());
  std::copy(request.begin(), request.begin() + 6, server.mac.begin());
  client.ip = be32_at(request, 26);
  server.ip = be32_at(request, 30);
  client.port = be16_at(request, 34);
  server.port = be16_at(request, 36);
  return build_frame(server, client, be16_at(request, 42), payload);
}

std::string encode_value_reply(std::string_view key, std::uint32_t flags, std::string_view data) {
  std::string r = "VALUE ";
  r.append(key).append(" ").append(std::to_string(flags)).append(" ");
  r.append(std::to_string(data.size())).append("\r\n").append(data).append("\r\nEND\r\n");
  return r;
}

// ---- requests and the reference server -------------------------------------

Frame Request::encode() const {
  return op == Op::Get ? build_get(client_endpoint(client), request_id, key)
                       : build_set(client_endpoint(client), request_id, key, flags, data);
}

std::optional<Request> parse_request(std::span<const std::uint8_t> frame) {
  auto payload = frame_payload(frame);
  if (!payload) return std::nullopt;
  std::string_view p = *payload;
  Request r;
  r.client = be32_at(frame, 26) & 0xffff;
  r.request_id = be16_at(frame, 42);
  if (p.starts_with("get ")) {
    auto end = p.find("\r\n", 4);
    if (end == std::string_view::npos || end == 4) return std::nullopt;
    r.op = Op::Get;
    r.key = std::string(p.substr(4, end - 4));
    if (r.key.size() > kMaxKeyLen || r.key.find(' ') != std::string::npos) return std::nullopt;
    return r;
  }
  if (p.starts_with("set ")) {
    auto line_end = p.find("\r\n");
    if (line_end == std::string_view::npos) return std::nullopt;
    std::string_view line = p.substr(4, line_end - 4);
    std::vector<std::string_view> parts;
    while (!line.empty()) {
      auto sp = line.find(' ');
      parts.push_back(line.substr(0, sp));
      if (sp == std::string_view::npos) break;
      line.remove_prefix(sp + 1);
    }
    if (parts.size() != 4 || parts[0].empty() || parts[0].size() > kMaxKeyLen) return std::nullopt;
    std::uint64_t bytes = 0;
    try {
      r.flags = static_cast<std::uint32_t>(std::stoul(std::string(parts[1])));
      bytes = std::stoull(std::string(parts[3]));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (p.size() < line_end + 2 + bytes + 2) return std::nullopt;
    r.op = Op::Set;
    r.key = std::string(parts[0]);
    r.data = std::string(p.substr(line_end + 2, bytes));
    return r;
  }
  return std::nullopt;
}

RefStore::RefStore(std::size_t shards) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, shards); ++i) shards_.push_back(std::make_unique<Shard>());
}

RefStore::Shard& RefStore::shard_for(const std::string& key) const {
  return *shards_[fnv1a32(bytes_of(key)) % shards_.size()];
}

std::optional<std::pair<std::uint32_t, std::string>> RefStore::get(const std::string& key) const {
  auto& s = shard_for(key);
  std::lock_guard lk(s.mu);
  auto it = s.items.find(key);
  if (it == s.items.end()) return std::nullopt;
  return it->second;
}

void RefStore::set(const std::string& key, std::uint32_t flags, std::string data) {
  auto& s = shard_for(key);
  std::lock_guard lk(s.mu);
  s.items[key] = {flags, std::move(data)};
}

std::size_t RefStore::size() const {
  std::size_t n = 0;
  for (const auto& s : shards_) {
    std::lock_guard lk(s->mu);
    n += s->items.size();
  }
  return n;
}

std::optional<std::string> RefStore::handle(std::span<const std::uint8_t> frame) {
  auto req = parse_request(frame);
  if (!req) return std::nullopt;
  if (req->op == Op::Set) {
    set(req->key, req->flags, std::move(req->data));
    return std::string("STORED\r\n");
  }
  auto item = get(req->key);
  if (!item) return std::string("END\r\n");
  return encode_value_reply(req->key, item->first, item->second);
}

// ---- workloads and traces ---------------------------------------------------

std::string workload_key(std::uint64_t seed, std::uint32_t i) {
  const auto r = splitmix(seed * 0x100000001b3ull + i);
  const std::size_t len = 6 + r % (kMaxKeyLen - 6 + 1);
  return padded_key("k" + std::to_string(i) + ":", len, r >> 32);
}

std::string max_length_key(std::uint32_t i) { return padded_key("K" + std::to_string(i) + ":", kMaxKeyLen, i); }

std::vector<Request> generate_workload(const WorkloadSpec& spec) {
  if (spec.keys == 0) throw std::invalid_argument("workload needs at least one key");
  if (spec.min_value > spec.max_value) throw std::invalid_argument("min_value above max_value");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> key_pick(0, spec.keys - 1);
  std::uniform_int_distribution<std::uint32_t> value_len(spec.min_value, spec.max_value);
  std::uniform_int_distribution<std::uint32_t> client_pick(0, std::max(1u, spec.clients) - 1);
  std::vector<Request> out;
  out.reserve(spec.count);
  for (std::uint64_t n = 0; n < spec.count; ++n) {
    Request r;
    r.op = coin(rng) < spec.get_ratio ? Op::Get : Op::Set;
    const auto k = key_pick(rng);
    r.key = workload_key(spec.seed, k);
    r.client = client_pick(rng);
    r.request_id = static_cast<std::uint16_t>(n);
    if (r.op == Op::Set) {
      if (coin(rng) < spec.max_key_set_ratio) r.key = max_length_key(k);
      r.flags = static_cast<std::uint32_t>(rng() % 65536);
      r.data.resize(value_len(rng));
      for (auto& ch : r.data) ch = static_cast<char>(' ' + rng() % 95);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<Frame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& f : frames) {
    const auto n = static_cast<std::uint32_t>(f.size());
    const std::uint8_t len[4] = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                 static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24)};
    out.write(reinterpret_cast<const char*>(len), 4);
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size()));
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<Frame> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Frame> frames;
  for (;;) {
    std::uint8_t len[4];
    in.read(reinterpret_cast<char*>(len), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw std::runtime_error(path.string() + ": truncated length prefix");
    const std::uint32_t n = len[0] | len[1] << 8 | len[2] << 16 | static_cast<std::uint32_t>(len[3]) << 24;
    Frame f(n);
    in.read(reinterpret_cast<char*>(f.data()), n);
    if (static_cast<std::uint32_t>(in.gcount()) != n) throw std::runtime_error(path.string() + ": truncated frame");
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---- harness ------------------------------------------------------------------

Rig::Rig(Host& host, Config cfg, bool faulty_ingress)
    : host_(host), cfg_(std::move(cfg)), faulty_(faulty_ingress) {
  reload();
}

bool Rig::loaded() const { return ingress_.valid() && egress_.valid(); }

void Rig::reload() {
  const auto in_id = (faulty_ ? "bmc.faulty" : "bmc.ingress") + std::string(cfg_.map_prefix == "bmc" ? "" : "." + cfg_.map_prefix);
  const auto eg_id = "bmc.egress" + std::string(cfg_.map_prefix == "bmc" ? "" : "." + cfg_.map_prefix);
  if (!ingress_.valid()) {
    if (auto h = host_.find_extension(in_id))
      ingress_ = *h;
    else
      ingress_ = faulty_ ? host_.load_extension(faulty_manifest(cfg_, in_id), make_ingress_faulty(host_, cfg_))
                         : host_.load_extension(ingress_manifest(cfg_, in_id), make_ingress(host_, cfg_));
  }
  if (!egress_.valid()) {
    if (auto h = host_.find_extension(eg_id))
      egress_ = *h;
    else
      egress_ = host_.load_extension(egress_manifest(cfg_, eg_id), make_egress(host_, cfg_));
  }
}

Served Rig::serve(unsigned worker, std::span<const std::uint8_t> frame, PacketBuffer& buf) {
  Served s;
  if (!buf.assign(frame)) {
    s.verdict = Verdict::drop();
    return s;
  }
  ProgramContext ctx{&buf, {}};
  auto out = host_.dispatch(worker, ingress_, ctx);
  s.verdict = out.verdict;
  s.panicked = out.panicked();
  if (s.panicked || out.verdict == Verdict::drop()) return s;
  if (out.verdict == Verdict::tx()) {
    s.from_cache = true;
    s.reply.assign(buf.bytes().begin(), buf.bytes().end());
    return s;
  }
  auto payload = store_.handle(frame);
  if (!payload) return s;
  s.reply = build_reply(frame, bytes_of(*payload));
  if (payload->starts_with("VALUE ")) {
    PacketBuffer eg;
    eg.assign(s.reply);
    ProgramContext ectx{&eg, {}};
    host_.dispatch(worker, egress_, ectx);
  }
  return s;
}

}  // namespace exthost::bmc
