// Loads, runs and unloads extensions from manifests. A host lives only as
// long as one invocation, so the set of loaded manifests and the panic log
// are kept in a state file and replayed on start.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "exthost/analyzer.hpp"
#include "exthost/bmc.hpp"
#include "exthost/env.hpp"
#include "exthost/manifest_io.hpp"
#include "exthost/programs.hpp"

using namespace exthost;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct State {
  std::vector<std::string> manifests;  // absolute paths, load order
  std::vector<std::string> log;

  static State read(const fs::path& p) {
    State s;
    if (!fs::exists(p)) return s;
    std::ifstream in(p);
    auto j = json::parse(in);
    s.manifests = j.value("manifests", std::vector<std::string>{});
    s.log = j.value("log", std::vector<std::string>{});
    return s;
  }
  void write(const fs::path& p) const {
    std::ofstream out(p);
    out << json{{"manifests", manifests}, {"log", log}}.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write state file " + p.string());
  }
};

std::string describe(const StackMode& m) {
  if (auto* s = std::get_if<StaticallyBounded>(&m)) return "static bound " + std::to_string(s->total_bytes) + " bytes";
  return "runtime-checked";
}

ExtensionHandle load(Host& host, const ExtensionManifest& m) {
  auto entry = programs::lookup(host, m);
  if (!entry) throw std::runtime_error("no built-in program for entry symbol '" + m.entry_symbol + "'");
  return host.load_extension(m, std::move(entry));
}

// Replays the state; manifests that no longer load are dropped with a note.
void replay(Host& host, State& st) {
  std::vector<std::string> kept;
  for (const auto& path : st.manifests) {
    try {
      load(host, load_manifest_file(path));
      kept.push_back(path);
    } catch (const std::exception& e) {
      std::cerr << "note: dropping " << path << ": " << e.what() << "\n";
    }
  }
  st.manifests = std::move(kept);
}

void forget(State& st, const std::vector<std::string>& removed) {
  std::erase_if(st.manifests, [&](const std::string& path) {
    auto id = load_manifest_file(path).extension_id;
    return std::find(removed.begin(), removed.end(), id) != removed.end();
  });
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exthost extension host"};
  std::string state_path = "exthost_state.json";
  HostConfig cfg;
  unsigned timeout_ms = 100, period_ms = 50;
  app.add_option("--state", state_path, "State file with loaded manifests and the panic log");
  app.add_option("--workers", cfg.num_workers, "Worker lanes")->check(CLI::Range(1u, 256u));
  app.add_option("--timeout-ms", timeout_ms, "Termination timeout");
  app.add_option("--period-ms", period_ms, "Watchdog period");
  app.require_subcommand(1);

  auto* load_cmd = app.add_subcommand("load", "Lint, classify and load a manifest");
  std::string manifest_path;
  load_cmd->add_option("manifest", manifest_path)->required()->check(CLI::ExistingFile);

  auto* check_cmd = app.add_subcommand("check", "Lint and classify a manifest without loading it");
  check_cmd->add_option("manifest", manifest_path)->required()->check(CLI::ExistingFile);

  auto* unload_cmd = app.add_subcommand("unload", "Unload an extension");
  std::string ext_id;
  bool cascade = false;
  unload_cmd->add_option("id", ext_id)->required();
  unload_cmd->add_flag("--cascade", cascade, "Also unload everything sharing a map with it");

  app.add_subcommand("list", "List loaded extensions and maps");
  app.add_subcommand("log", "Print the panic log");
  app.add_subcommand("programs", "List built-in entry symbols");

  auto* run_cmd = app.add_subcommand("run", "Dispatch an extension");
  unsigned worker = 0, count = 1;
  std::size_t packet_size = 64;
  std::string frame_path, trace_path;
  std::vector<std::int64_t> args;
  run_cmd->add_option("id", ext_id)->required();
  run_cmd->add_option("--worker", worker);
  run_cmd->add_option("--count", count, "Dispatches (per frame with --trace)");
  auto* size_opt = run_cmd->add_option("--packet-size", packet_size, "Zero-filled frame of this size");
  auto* frame_opt = run_cmd->add_option("--frame", frame_path, "Raw frame file")->check(CLI::ExistingFile);
  auto* trace_opt = run_cmd->add_option("--trace", trace_path, "Frame trace from bmcgen")->check(CLI::ExistingFile);
  frame_opt->excludes(size_opt)->excludes(trace_opt);
  trace_opt->excludes(size_opt);
  run_cmd->add_option("--arg", args, "Integer arguments for trace-event programs (up to 4)")->expected(0, 4);

  CLI11_PARSE(app, argc, argv);
  cfg.termination_timeout = std::chrono::milliseconds(timeout_ms);
  cfg.watchdog_period = std::chrono::milliseconds(period_ms);

  try {
    if (app.got_subcommand("programs")) {
      for (const auto& s : programs::symbols()) std::cout << s << "\n";
      return 0;
    }
    State st = State::read(state_path);
    Host host(cfg);
    replay(host, st);

    if (app.got_subcommand(check_cmd)) {
      auto m = load_manifest_file(manifest_path);
      auto lint = lint_manifest(m);
      if (!lint.accepted()) {
        for (const auto& v : lint.violations) std::cout << "rejected: " << v.feature << ": " << v.reason << "\n";
        return 1;
      }
      if (auto big = check_frame_limits(m.callgraph, cfg)) {
        std::cout << "rejected: function '" << *big << "' frame exceeds " << cfg.per_function_frame_limit << " bytes\n";
        return 1;
      }
      auto mode = classify_stack_mode(m.callgraph, m.entry_symbol, cfg);
      std::cout << m.extension_id << ": " << describe(mode) << "\n";
      for (const auto& f : unreachable_functions(m.callgraph, m.entry_symbol))
        std::cout << "warning: function '" << f << "' is unreachable from the entry\n";
      return 0;
    }
    if (app.got_subcommand(load_cmd)) {
      auto m = load_manifest_file(manifest_path);
      ExtensionHandle h;
      try {
        h = load(host, m);
      } catch (const LintRejectedError& e) {
        for (const auto& v : e.report().violations) std::cout << "rejected: " << v.feature << ": " << v.reason << "\n";
        return 1;
      }
      for (const auto& w : h.record().warnings()) std::cout << "warning: " << w << "\n";
      std::cout << "loaded " << m.extension_id << " (" << describe(h.stack_mode()) << ")\n";
      st.manifests.push_back(fs::absolute(manifest_path).string());
    } else if (app.got_subcommand(unload_cmd)) {
      auto removed = host.unload_extension(ext_id, cascade);
      std::cout << "unloaded";
      for (const auto& id : removed) std::cout << " " << id;
      std::cout << "\n";
      forget(st, removed);
    } else if (app.got_subcommand("list")) {
      for (const auto& id : host.extension_ids()) {
        auto h = *host.find_extension(id);
        std::cout << id << "  " << describe(h.stack_mode()) << "  maps:";
        for (const auto& m : h.attached_maps()) std::cout << " " << m;
        std::cout << "\n";
      }
    } else if (app.got_subcommand("log")) {
      for (const auto& line : st.log) std::cout << line << "\n";
    } else if (app.got_subcommand(run_cmd)) {
      auto h = host.find_extension(ext_id);
      if (!h) throw Error(ErrorCode::UnknownExtension, "no extension '" + ext_id + "'");
      std::vector<bmc::Frame> frames;
      if (!trace_path.empty()) frames = bmc::read_trace(trace_path);
      else if (!frame_path.empty()) frames.push_back(read_file(frame_path));
      else frames.emplace_back(packet_size, 0);
      host.arm_watchdogs();
      PacketBuffer buf;
      std::uint64_t n = 0;
      std::vector<std::string> removed;
      for (const auto& f : frames) {
        for (unsigned i = 0; i < count && removed.empty(); ++i, ++n) {
          ProgramContext ctx;
          for (std::size_t a = 0; a < args.size(); ++a) ctx.args[a] = args[a];
          if (h->record().kind() == ProgramKind::PacketIngress) {
            if (!buf.assign(f)) throw std::runtime_error("frame exceeds the packet buffer");
            ctx.packet = &buf;
          }
          auto out = host.dispatch(worker, *h, ctx);
          std::cout << "dispatch " << n << ": verdict " << out.verdict.raw();
          if (out.panicked()) {
            std::cout << " panic " << to_string(out.panic->reason) << ": " << out.panic->message;
            st.log.push_back(out.panic->to_log_line());
            removed = out.removed;
          }
          std::cout << "\n";
        }
      }
      host.disarm_watchdogs();
      if (!removed.empty()) {
        std::cout << "crash-stop removed";
        for (const auto& id : removed) std::cout << " " << id;
        std::cout << "\n";
        forget(st, removed);
      }
    }
    st.write(state_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
