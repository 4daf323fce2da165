// Runs one benchmark and prints or writes its report. Exit status 1 means
// the run breached an invariant.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "exthost/bench.hpp"

using namespace exthost;

namespace {

void print_table(const bench::BenchReport& r, std::ostream& out) {
  out << "bench " << r.bench << "\n";
  for (const auto& [k, v] : r.params) out << "  " << k << " = " << v << "\n";
  for (const auto& m : r.metrics) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-28s %16.3f %s\n", m.name.c_str(), m.value, m.unit.c_str());
    out << line;
  }
  for (const auto& b : r.breaches) out << "  BREACH: " << b << "\n";
  out << (r.ok() ? "ok\n" : "FAILED\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exthost benchmarks"};
  std::string which, out_path, trace_path;
  bool as_json = false, as_csv = false;
  bench::Timing timing;
  unsigned depth = 10;
  std::uint32_t hash_keys = 4096;
  bench::BmcSimOptions sim;
  bench::StormOptions storm;

  app.add_option("bench", which, "Benchmark to run")
      ->required()
      ->check(CLI::IsMember({"empty", "spinlock", "recursion", "map", "bmc", "storm"}));
  auto* json_flag = app.add_flag("--json", as_json, "Emit JSON");
  app.add_flag("--csv", as_csv, "Emit CSV")->excludes(json_flag);
  app.add_option("--out", out_path, "Write the report here instead of stdout");
  app.add_option("--iterations", timing.iterations, "Operations per sample (at least 10000)")
      ->check(CLI::Range(std::uint64_t{10000}, std::numeric_limits<std::uint64_t>::max()));
  app.add_option("--samples", timing.samples, "Samples (at least 1000)")
      ->check(CLI::Range(bench::Timing::kReportSamples, std::numeric_limits<unsigned>::max()));
  app.add_option("--depth", depth, "recursion: call depth");
  app.add_option("--hash-keys", hash_keys, "map: keys in the large hash map")->check(CLI::PositiveNumber);
  app.add_option("--workers", sim.workers, "bmc: worker lanes")->check(CLI::Range(1u, 256u));
  app.add_option("--keys", sim.workload.keys, "bmc: key space")->check(CLI::PositiveNumber);
  app.add_option("--get-ratio", sim.workload.get_ratio, "bmc: fraction of GETs")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", sim.workload.seed, "bmc/storm: workload seed");
  app.add_option("--count", sim.workload.count, "bmc: requests");
  app.add_option("--cache-entries", sim.cache.cache_entries, "bmc: cache slots")->check(CLI::PositiveNumber);
  app.add_flag("--prefill", sim.prefill, "bmc: warm the cache first");
  app.add_option("--trace", trace_path, "bmc: replay a trace file instead of generating")->check(CLI::ExistingFile);
  app.add_option("--panics", storm.panics, "storm: injected panics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    bench::BenchReport r;
    if (which == "empty") {
      r = bench::run_empty(timing);
      r.params["in_kernel_reference_ns"] = "42.6";
    } else if (which == "spinlock") {
      r = bench::run_spinlock(timing);
      r.params["in_kernel_reference_ns"] = "183.1";
    } else if (which == "recursion") {
      r = bench::run_recursion(timing, depth);
    } else if (which == "map") {
      r = bench::run_map(timing, hash_keys);
    } else if (which == "bmc") {
      r = bench::run_bmc_sim(sim, trace_path.empty() ? std::vector<bmc::Frame>{} : bmc::read_trace(trace_path));
    } else {
      storm.seed = sim.workload.seed;
      r = bench::run_panic_storm(storm);
    }

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw std::runtime_error("cannot write " + out_path);
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    if (as_json) out << r.to_json();
    else if (as_csv) out << r.to_csv();
    else print_table(r, out);
    if (!r.ok()) {
      for (const auto& b : r.breaches) std::cerr << "breach: " << b << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
