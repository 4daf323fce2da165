// Writes a memcached request trace for the cache benchmarks.

#include <CLI11.hpp>

#include <iostream>

#include "exthost/bmc.hpp"

using namespace exthost;

int main(int argc, char** argv) {
  CLI::App app{"memcached request trace generator"};
  bmc::WorkloadSpec spec;
  std::string out_path;
  app.add_option("--keys", spec.keys, "Key space")->check(CLI::PositiveNumber);
  app.add_option("--get-ratio", spec.get_ratio, "Fraction of GETs")->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", spec.seed, "Seed");
  app.add_option("--count", spec.count, "Requests");
  app.add_option("--min-value", spec.min_value, "Smallest SET value");
  app.add_option("--max-value", spec.max_value, "Largest SET value");
  app.add_option("--max-key-set-ratio", spec.max_key_set_ratio, "Fraction of SETs with a 250-byte key")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--clients", spec.clients, "Distinct client endpoints")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "Trace file")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<bmc::Frame> frames;
    std::uint64_t gets = 0;
    for (const auto& r : bmc::generate_workload(spec)) {
      gets += r.op == bmc::Op::Get;
      frames.push_back(r.encode());
    }
    bmc::write_trace(out_path, frames);
    std::cout << "wrote " << frames.size() << " frames (" << gets << " GET, " << frames.size() - gets << " SET) to "
              << out_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
