#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "exthost/bmc.hpp"

// Microbenchmarks, the cache throughput simulation and the panic storm. Every
// run produces a BenchReport; `breaches` lists violated invariants.
namespace exthost::bench {

struct Metric {
  std::string name;
  double value = 0;
  std::string unit;
  bool operator==(const Metric&) const = default;
};

struct BenchReport {
  std::string bench;
  std::map<std::string, std::string> params;
  std::vector<Metric> metrics;
  std::vector<std::string> breaches;

  bool ok() const noexcept { return breaches.empty(); }
  void add(std::string name, double value, std::string unit);
  void breach(std::string what);
  const Metric* find(std::string_view name) const noexcept;
  /// Throws std::out_of_range if the metric is absent.
  double value(std::string_view name) const;

  /// Layout described by docs/bench_report.schema.json.
  std::string to_json() const;
  static BenchReport from_json(std::string_view text);
  /// Rows of section,name,value,unit with section one of bench, param,
  /// metric, breach.
  std::string to_csv() const;
  static BenchReport from_csv(std::string_view text);

  bool operator==(const BenchReport&) const = default;
};

/// Each sample times `iterations` operations; values are per operation.
/// Every timed series reports mean, stddev, min, p50 and p99 over the samples.
struct Timing {
  static constexpr unsigned kReportSamples = 1000;
  std::uint64_t iterations = 10000;
  unsigned samples = kReportSamples;
};

/// Host dispatch of an empty extension vs a bare call of the same body.
BenchReport run_empty(const Timing& t = {});
/// Guarded spinlock inside an extension vs raw lock/unlock on the host.
BenchReport run_spinlock(const Timing& t = {});
/// Nested calls through the shadow-stack check vs plain recursion.
BenchReport run_recursion(const Timing& t = {}, unsigned depth = 10);
/// Lookup latency: host static, array map, hash map with 1 and `hash_keys` keys.
BenchReport run_map(const Timing& t = {}, std::uint32_t hash_keys = 4096);

struct BmcSimOptions {
  unsigned workers = 1;
  bmc::WorkloadSpec workload;
  bmc::Config cache;
  /// SET and GET every key once before timing, so the cache starts warm.
  bool prefill = false;
};

/// Requests are generated from `workload` unless `trace` is non-empty.
/// Frame i goes to worker i % workers.
BenchReport run_bmc_sim(const BmcSimOptions& opts, const std::vector<bmc::Frame>& trace = {});

struct StormOptions {
  std::uint64_t panics = 10000;
  std::uint64_t seed = 1;
  /// Called with each request to the healthy cache and what it got back.
  std::function<void(const bmc::Request&, const bmc::Served&)> on_healthy;
};

/// The faulty cache receives `panics` maximal-key SETs, each crash-stopping
/// it, and is reloaded after every one; a healthy cache with its own maps
/// gets one request per round.
BenchReport run_panic_storm(const StormOptions& opts);

}  // namespace exthost::bench
