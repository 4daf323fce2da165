#include "exthost/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <latch>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "exthost/env.hpp"

namespace exthost::bench {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---- report -------------------------------------------------------------

void BenchReport::add(std::string name, double value, std::string unit) {
  metrics.push_back({std::move(name), std::isfinite(value) ? value : 0.0, std::move(unit)});
}

void BenchReport::breach(std::string what) {
  constexpr std::size_t kMaxListed = 20;
  if (breaches.size() < kMaxListed) breaches.push_back(std::move(what));
  else if (breaches.size() == kMaxListed) breaches.push_back("further breaches omitted");
}

const Metric* BenchReport::find(std::string_view name) const noexcept {
  for (const auto& m : metrics)
    if (m.name == name) return &m;
  return nullptr;
}

double BenchReport::value(std::string_view name) const {
  if (auto* m = find(name)) return m->value;
  throw std::out_of_range("no metric " + std::string(name) + " in report " + bench);
}

std::string BenchReport::to_json() const {
  json j;
  j["bench"] = bench;
  j["params"] = params;
  j["metrics"] = json::array();
  for (const auto& m : metrics) j["metrics"].push_back({{"name", m.name}, {"value", m.value}, {"unit", m.unit}});
  j["breaches"] = breaches;
  j["ok"] = ok();
  return j.dump(2) + "\n";
}

BenchReport BenchReport::from_json(std::string_view text) {
  BenchReport r;
  try {
    auto j = json::parse(text);
    r.bench = j.at("bench").get<std::string>();
    r.params = j.at("params").get<std::map<std::string, std::string>>();
    for (const auto& m : j.at("metrics"))
      r.metrics.push_back({m.at("name").get<std::string>(), m.at("value").get<double>(), m.at("unit").get<std::string>()});
    r.breaches = j.at("breaches").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad bench report: ") + e.what());
  }
  return r;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') field += '"', ++i;
      else if (c == '"') quoted = false;
      else field += c;
    } else if (c == '"') {
      quoted = any = true;
    } else if (c == ',') {
      row.push_back(std::move(field)), field.clear(), any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field)), field.clear();
      rows.push_back(std::move(row)), row.clear();
      any = false;
    } else if (c != '\r') {
      field += c, any = true;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote in CSV");
  if (any || !field.empty()) row.push_back(std::move(field)), rows.push_back(std::move(row));
  return rows;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "section,name,value,unit\n";
  out << "bench," << csv_field(bench) << ",,\n";
  for (const auto& [k, v] : params) out << "param," << csv_field(k) << ',' << csv_field(v) << ",\n";
  for (const auto& m : metrics)
    out << "metric," << csv_field(m.name) << ',' << format_double(m.value) << ',' << csv_field(m.unit) << '\n';
  for (const auto& b : breaches) out << "breach," << csv_field(b) << ",,\n";
  return out.str();
}

BenchReport BenchReport::from_csv(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"section", "name", "value", "unit"})
    throw std::invalid_argument("bench CSV lacks its header row");
  BenchReport r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4) throw std::invalid_argument("bench CSV row " + std::to_string(i) + " has " +
                                                     std::to_string(row.size()) + " fields");
    if (row[0] == "bench") r.bench = row[1];
    else if (row[0] == "param") r.params[row[1]] = row[2];
    else if (row[0] == "metric") {
      char* end = nullptr;
      double v = std::strtod(row[2].c_str(), &end);
      if (row[2].empty() || *end != '\0') throw std::invalid_argument("bad metric value '" + row[2] + "'");
      r.metrics.push_back({row[1], v, row[3]});
    } else if (row[0] == "breach") r.breaches.push_back(row[1]);
    else throw std::invalid_argument("unknown CSV section '" + row[0] + "'");
  }
  return r;
}

// ---- helpers ------------------------------------------------------------------

namespace {

template <class T>
inline void keep(const T& v) {
  asm volatile("" : : "r,m"(v) : "memory");
}

double elapsed_ns(Clock::time_point t0) {
  return std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
}

struct Summary {
  double mean = 0, stddev = 0, min = 0, p50 = 0, p99 = 0;
};

// Nearest-rank percentile of sorted samples.
double percentile(const std::vector<double>& sorted, double q) {
  auto rank = static_cast<std::size_t>(std::ceil(q * double(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= double(xs.size());
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / double(xs.size()));
  auto sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.p50 = percentile(sorted, 0.50);
  s.p99 = percentile(sorted, 0.99);
  return s;
}

void add_summary(BenchReport& r, const std::string& prefix, const std::vector<double>& xs) {
  auto s = summarize(xs);
  r.add(prefix + "_mean", s.mean, "ns");
  r.add(prefix + "_stddev", s.stddev, "ns");
  r.add(prefix + "_min", s.min, "ns");
  r.add(prefix + "_p50", s.p50, "ns");
  r.add(prefix + "_p99", s.p99, "ns");
}

void timing_params(BenchReport& r, const Timing& t) {
  if (t.iterations == 0 || t.samples == 0) throw std::invalid_argument("iterations and samples must be positive");
  r.params["iterations"] = std::to_string(t.iterations);
  r.params["samples"] = std::to_string(t.samples);
}

ExtensionManifest one_function(std::string id, std::vector<MapSpec> maps = {}) {
  ExtensionManifest m;
  m.extension_id = std::move(id);
  m.entry_symbol = "main";
  m.callgraph.nodes.push_back({"main", 256, true});
  m.declared_maps = std::move(maps);
  return m;
}

void audit_worker(BenchReport& r, WorkerState& w) {
  if (!w.cleanup_registry.empty())
    r.breach("worker " + std::to_string(w.worker_id) + " cleanup registry holds " +
             std::to_string(w.cleanup_registry.size()) + " records");
  if (w.lock_held) r.breach("worker " + std::to_string(w.worker_id) + " still marked as holding a lock");
  if (w.flag() != ExecFlag::Idle) r.breach("worker " + std::to_string(w.worker_id) + " flag not idle");
  if (w.busy()) r.breach("worker " + std::to_string(w.worker_id) + " still busy");
}

void audit_map(BenchReport& r, Map& m) {
  if (m.outstanding_refs() != 0)
    r.breach("map " + m.spec().map_id + " has " + std::to_string(m.outstanding_refs()) + " outstanding refs");
  for (std::uint32_t i = 0; i < m.spec().max_entries; ++i)
    if (m.entry_lock(i)->locked()) {
      r.breach("map " + m.spec().map_id + " entry lock " + std::to_string(i) + " held");
      break;
    }
}

void expect_no_panic(BenchReport& r, const DispatchOutcome& out) {
  if (out.panicked()) r.breach("unexpected panic: " + out.panic->message);
}

}  // namespace

// ---- microbenchmarks ----------------------------------------------------------

BenchReport run_empty(const Timing& t) {
  BenchReport r;
  r.bench = "empty";
  timing_params(r, t);
  Host host;
  auto h = host.load_extension(one_function("bench.empty"), [](Env&, ProgramContext&) { return Verdict::pass(); });
  std::function<Verdict(ProgramContext&)> bare = [](ProgramContext&) { return Verdict::pass(); };
  ProgramContext ctx;
  std::vector<double> dispatch_ns, bare_ns;
  for (unsigned s = 0; s < t.samples; ++s) {
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < t.iterations; ++i) {
      auto out = host.dispatch(0, h, ctx);
      keep(out.verdict);
    }
    dispatch_ns.push_back(elapsed_ns(t0) / double(t.iterations));
    t0 = Clock::now();
    for (std::uint64_t i = 0; i < t.iterations; ++i) keep(bare(ctx));
    bare_ns.push_back(elapsed_ns(t0) / double(t.iterations));
  }
  add_summary(r, "dispatch", dispatch_ns);
  add_summary(r, "bare_call", bare_ns);
  r.add("overhead", summarize(dispatch_ns).mean - summarize(bare_ns).mean, "ns");
  audit_worker(r, host.worker(0));
  return r;
}

BenchReport run_spinlock(const Timing& t) {
  BenchReport r;
  r.bench = "spinlock";
  timing_params(r, t);
  Host host;
  auto& cell = host.create_spinlock("bench.lock");
  std::vector<double> guarded_ns, raw_ns;
  auto h = host.load_extension(one_function("bench.spinlock"), [&](Env& env, ProgramContext&) {
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < t.iterations; ++i) {
      auto g = env.spin_lock(cell);
      keep(g);
    }
    guarded_ns.push_back(elapsed_ns(t0) / double(t.iterations));
    return Verdict::pass();
  });
  ProgramContext ctx;
  const auto token = SpinlockCell::token_for(0);
  for (unsigned s = 0; s < t.samples; ++s) {
    expect_no_panic(r, host.dispatch(0, h, ctx));
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < t.iterations; ++i) {
      cell.lock(token);
      keep(cell);
      cell.unlock(token);
    }
    raw_ns.push_back(elapsed_ns(t0) / double(t.iterations));
  }
  add_summary(r, "guarded_lock", guarded_ns);
  add_summary(r, "raw_lock", raw_ns);
  r.add("overhead", summarize(guarded_ns).mean - summarize(raw_ns).mean, "ns");
  if (cell.locked()) r.breach("bench lock left held");
  audit_worker(r, host.worker(0));
  return r;
}

namespace {

constexpr std::size_t kRecursionFrame = 512;

__attribute__((noinline)) std::uint64_t plain_recurse(unsigned left) {
  std::uint64_t v = left;
  keep(v);
  return left <= 1 ? v : v + plain_recurse(left - 1);
}

std::uint64_t checked_recurse(Env& env, unsigned left) {
  if (left <= 1) return left;
  return left + env.call(kRecursionFrame, [&] { return checked_recurse(env, left - 1); });
}

}  // namespace

BenchReport run_recursion(const Timing& t, unsigned depth) {
  BenchReport r;
  r.bench = "recursion";
  timing_params(r, t);
  r.params["depth"] = std::to_string(depth);
  r.params["frame_bytes"] = std::to_string(kRecursionFrame);
  if (depth < 2) throw std::invalid_argument("recursion depth must be at least 2");
  Host host;
  auto m = one_function("bench.recursion");
  m.callgraph.nodes[0].frame_bytes = kRecursionFrame;
  m.callgraph.edges.push_back({"main", {"main"}, EdgeKind::Direct});
  if ((depth + 1) * kRecursionFrame > host.config().stack_threshold_bytes())
    throw std::invalid_argument("recursion depth exceeds the stack threshold");
  std::vector<double> checked_ns, plain_ns;
  const std::uint64_t rounds = std::max<std::uint64_t>(1, t.iterations / depth);
  auto h = host.load_extension(m, [&](Env& env, ProgramContext&) {
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < rounds; ++i) keep(checked_recurse(env, depth));
    checked_ns.push_back(elapsed_ns(t0) / double(rounds * (depth - 1)));
    return Verdict::pass();
  });
  ProgramContext ctx;
  for (unsigned s = 0; s < t.samples; ++s) {
    expect_no_panic(r, host.dispatch(0, h, ctx));
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < rounds; ++i) keep(plain_recurse(depth));
    plain_ns.push_back(elapsed_ns(t0) / double(rounds * (depth - 1)));
  }
  add_summary(r, "checked_call", checked_ns);
  add_summary(r, "plain_call", plain_ns);
  r.add("overhead", summarize(checked_ns).mean - summarize(plain_ns).mean, "ns");
  r.add("stack_high_water", double(host.worker(0).shadow_stack_high_water), "bytes");
  audit_worker(r, host.worker(0));
  return r;
}

BenchReport run_map(const Timing& t, std::uint32_t hash_keys) {
  BenchReport r;
  r.bench = "map";
  timing_params(r, t);
  r.params["hash_keys"] = std::to_string(hash_keys);
  if (hash_keys == 0) throw std::invalid_argument("hash_keys must be positive");
  Host host;
  auto& var = host.register_static("bench.static");
  std::vector<double> static_ns, array_ns, hash1_ns, hashn_ns;
  const std::uint64_t iters = t.iterations;
  auto lookup_loop = [iters](Env& env, std::uint32_t keys, std::vector<double>& out) {
    Map& m = env.map(0);
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < iters; ++i) {
      auto key = Map::index_key(static_cast<std::uint32_t>(i % keys));
      auto v = env.map_lookup(m, key);
      keep(v->bytes().at(0));
    }
    out.push_back(elapsed_ns(t0) / double(iters));
  };

  auto h_static = host.load_extension(one_function("bench.static"), [&](Env&, ProgramContext&) {
    auto t0 = Clock::now();
    for (std::uint64_t i = 0; i < iters; ++i) keep(var.read());
    static_ns.push_back(elapsed_ns(t0) / double(iters));
    return Verdict::pass();
  });
  auto h_array = host.load_extension(one_function("bench.array", {{"bench.array", MapKind::Array, 4, 8, 1}}),
                                     [&](Env& env, ProgramContext&) {
                                       lookup_loop(env, 1, array_ns);
                                       return Verdict::pass();
                                     });
  auto h_hash1 = host.load_extension(one_function("bench.hash1", {{"bench.hash1", MapKind::Hash, 4, 8, 1}}),
                                     [&](Env& env, ProgramContext&) {
                                       lookup_loop(env, 1, hash1_ns);
                                       return Verdict::pass();
                                     });
  auto h_hashn =
      host.load_extension(one_function("bench.hashn", {{"bench.hashn", MapKind::Hash, 4, 8, hash_keys}}),
                          [&](Env& env, ProgramContext&) {
                            lookup_loop(env, hash_keys, hashn_ns);
                            return Verdict::pass();
                          });
  const std::uint8_t zero[8] = {};
  host.find_map("bench.hash1")->update(0, Map::index_key(0), zero);
  for (std::uint32_t k = 0; k < hash_keys; ++k)
    if (host.find_map("bench.hashn")->update(0, Map::index_key(k), zero) != MapStatus::Ok)
      r.breach("hash map refused key " + std::to_string(k));

  ProgramContext ctx;
  for (unsigned s = 0; s < t.samples; ++s)
    for (auto* h : {&h_static, &h_array, &h_hash1, &h_hashn}) expect_no_panic(r, host.dispatch(0, *h, ctx));

  add_summary(r, "static", static_ns);
  add_summary(r, "array", array_ns);
  add_summary(r, "hash_1", hash1_ns);
  add_summary(r, "hash_n", hashn_ns);
  const auto st = summarize(static_ns), ar = summarize(array_ns), h1 = summarize(hash1_ns),
             hn = summarize(hashn_ns);
  r.add("array_cv", ar.mean > 0 ? ar.stddev / ar.mean : 0, "ratio");
  r.add("hash_n_over_hash_1", h1.mean > 0 ? hn.mean / h1.mean : 0, "ratio");
  r.add("ordering_holds", st.mean <= ar.mean && ar.mean <= h1.mean ? 1 : 0, "bool");
  for (const auto& id : host.map_ids()) audit_map(r, *host.find_map(id));
  audit_worker(r, host.worker(0));
  return r;
}

// ---- cache simulation ---------------------------------------------------------

BenchReport run_bmc_sim(const BmcSimOptions& opts, const std::vector<bmc::Frame>& trace) {
  BenchReport r;
  r.bench = "bmc";
  if (opts.workers == 0) throw std::invalid_argument("workers must be positive");
  r.params["workers"] = std::to_string(opts.workers);
  r.params["cache_entries"] = std::to_string(opts.cache.cache_entries);
  r.params["prefill"] = opts.prefill ? "true" : "false";
  r.params["source"] = trace.empty() ? "generated" : "trace";
  if (trace.empty()) {
    r.params["keys"] = std::to_string(opts.workload.keys);
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%g", opts.workload.get_ratio);
    r.params["get_ratio"] = ratio;
    r.params["seed"] = std::to_string(opts.workload.seed);
    r.params["count"] = std::to_string(opts.workload.count);
  }

  HostConfig hc;
  hc.num_workers = opts.workers;
  Host host(hc);
  bmc::Rig rig(host, opts.cache);

  std::vector<bmc::Frame> frames = trace;
  if (frames.empty())
    for (const auto& req : bmc::generate_workload(opts.workload)) frames.push_back(req.encode());

  PacketBuffer warm_buf;
  if (opts.prefill) {
    auto spec = opts.workload;
    for (std::uint32_t k = 0; k < spec.keys; ++k) {
      const auto key = bmc::workload_key(spec.seed, k);
      std::string data(spec.min_value, 'p');
      rig.serve(0, bmc::build_set(bmc::client_endpoint(0), 0, key, 0, data), warm_buf);
      rig.serve(0, bmc::build_get(bmc::client_endpoint(0), 0, key), warm_buf);
    }
  }
  const auto before = bmc::read_stats(host, opts.cache);

  struct Lane {
    std::uint64_t served = 0, tx = 0, pass = 0, drop = 0, panics = 0;
    double seconds = 0;
  };
  std::vector<Lane> lanes(opts.workers);
  std::latch start(opts.workers + 1);
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < opts.workers; ++w)
    threads.emplace_back([&, w] {
      PacketBuffer buf;
      Lane& lane = lanes[w];
      start.arrive_and_wait();
      auto t0 = Clock::now();
      for (std::size_t i = w; i < frames.size(); i += opts.workers) {
        auto s = rig.serve(w, frames[i], buf);
        ++lane.served;
        lane.panics += s.panicked;
        if (s.verdict == Verdict::tx()) ++lane.tx;
        else if (s.verdict == Verdict::pass()) ++lane.pass;
        else ++lane.drop;
      }
      lane.seconds = elapsed_ns(t0) / 1e9;
    });
  start.arrive_and_wait();
  auto t0 = Clock::now();
  for (auto& th : threads) th.join();
  const double wall = elapsed_ns(t0) / 1e9;

  Lane total;
  double per_worker = 0;
  for (const auto& l : lanes) {
    total.served += l.served, total.tx += l.tx, total.pass += l.pass, total.drop += l.drop;
    total.panics += l.panics;
    per_worker += l.seconds > 0 ? double(l.served) / l.seconds : 0;
  }
  auto stats = bmc::read_stats(host, opts.cache);
  for (std::size_t i = 0; i < bmc::kStatCount; ++i) stats.v[i] -= before.v[i];

  r.add("requests", double(total.served), "count");
  r.add("wall_time", wall, "s");
  r.add("aggregate_rps", wall > 0 ? double(total.served) / wall : 0, "req/s");
  r.add("per_worker_rps_mean", per_worker / opts.workers, "req/s");
  r.add("hit_ratio", stats[bmc::GetRecv] ? double(stats[bmc::Hit]) / double(stats[bmc::GetRecv]) : 0, "ratio");
  r.add("verdict_tx", double(total.tx), "count");
  r.add("verdict_pass", double(total.pass), "count");
  r.add("verdict_drop", double(total.drop), "count");
  for (std::size_t i = 0; i < bmc::kStatCount; ++i)
    r.add(std::string("stat_") + std::string(bmc::to_string(static_cast<bmc::Stat>(i))), double(stats.v[i]), "count");
  if (total.panics) r.breach(std::to_string(total.panics) + " dispatches panicked");
  if (stats[bmc::Hit] != total.tx) r.breach("hit counter disagrees with Tx verdicts");
  for (unsigned w = 0; w < opts.workers; ++w) audit_worker(r, host.worker(w));
  for (const auto& id : host.map_ids()) audit_map(r, *host.find_map(id));
  return r;
}

// ---- panic storm --------------------------------------------------------------

BenchReport run_panic_storm(const StormOptions& opts) {
  BenchReport r;
  r.bench = "storm";
  r.params["panics"] = std::to_string(opts.panics);
  r.params["seed"] = std::to_string(opts.seed);

  HostConfig hc;
  hc.ring_capacity = std::max<std::size_t>(hc.ring_capacity, opts.panics);
  Host host(hc);
  bmc::Config faulty_cfg;
  faulty_cfg.cache_entries = 256;
  faulty_cfg.map_prefix = "storm";
  bmc::Config healthy_cfg;
  healthy_cfg.map_prefix = "healthy";
  bmc::Rig faulty(host, faulty_cfg, true);
  bmc::Rig healthy(host, healthy_cfg);
  const auto healthy_ids = std::vector<std::string>{healthy.ingress().extension_id(), healthy.egress().extension_id()};

  bmc::WorkloadSpec spec;
  spec.keys = 500;
  spec.get_ratio = 0.8;
  spec.seed = opts.seed;
  spec.count = opts.panics;
  spec.max_value = 200;
  const auto healthy_reqs = bmc::generate_workload(spec);

  PacketBuffer buf;
  std::uint64_t unexpected = 0, served = 0, reloads = 0;
  auto t0 = Clock::now();
  for (std::uint64_t i = 0; i < opts.panics; ++i) {
    auto faulty_map = host.find_map(faulty_cfg.cache_map());
    auto frame = bmc::build_set(bmc::client_endpoint(std::uint32_t(i)), std::uint16_t(i),
                                bmc::max_length_key(std::uint32_t(i % 1000)), 0, "v");
    auto s = faulty.serve(0, frame, buf);
    if (!s.panicked) ++unexpected;
    if (faulty.loaded()) r.breach("faulty cache still loaded after panic " + std::to_string(i));
    if (faulty_map && faulty_map->outstanding_refs() != 0) r.breach("faulty cache map leaked a pin");
    faulty.reload();
    ++reloads;

    const auto& req = healthy_reqs[i];
    auto h = healthy.serve(0, req.encode(), buf);
    if (!h.panicked && !h.reply.empty()) ++served;
    if (opts.on_healthy) opts.on_healthy(req, h);
  }
  const double secs = elapsed_ns(t0) / 1e9;

  const auto records = host.panic_log().total();
  const auto oob = host.panic_log().count(PanicReason::OutOfBounds);
  r.add("panics_injected", double(opts.panics), "count");
  r.add("panic_records", double(records), "count");
  r.add("out_of_bounds_records", double(oob), "count");
  r.add("reloads", double(reloads), "count");
  r.add("healthy_requests", double(healthy_reqs.size()), "count");
  r.add("healthy_served", double(served), "count");
  r.add("healthy_served_ratio", healthy_reqs.empty() ? 1.0 : double(served) / double(healthy_reqs.size()), "ratio");
  r.add("elapsed", secs, "s");

  if (unexpected) r.breach(std::to_string(unexpected) + " faulty dispatches did not panic");
  if (records != opts.panics) r.breach("panic ring holds " + std::to_string(records) + " records");
  if (oob != opts.panics) r.breach(std::to_string(oob) + " OutOfBounds records");
  if (served != healthy_reqs.size()) r.breach("healthy cache served " + std::to_string(served) + " requests");
  for (const auto& id : healthy_ids)
    if (!host.find_extension(id)) r.breach("healthy extension " + id + " was removed");
  for (const auto& ev : host.unload_events())
    for (const auto& id : ev.removed)
      if (std::find(healthy_ids.begin(), healthy_ids.end(), id) != healthy_ids.end())
        r.breach("healthy extension " + id + " appeared in an unload");
  audit_worker(r, host.worker(0));
  for (const auto& id : host.map_ids()) audit_map(r, *host.find_map(id));
  return r;
}

}  // namespace exthost::bench
