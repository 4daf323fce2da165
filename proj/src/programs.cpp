#include "exthost/programs.hpp"

#include "exthost/bmc.hpp"
#include "exthost/env.hpp"

namespace exthost::programs {

namespace {

void recurse(Env& env, std::size_t frame, std::int64_t left) {
  if (left == 1) return;
  env.call(frame, [&] { recurse(env, frame, left - 1); });
}

}  // namespace

EntryFn lookup(Host& host, const ExtensionManifest& m) {
  const auto& s = m.entry_symbol;
  if (s == "pass") return [](Env&, ProgramContext&) { return Verdict::pass(); };
  if (s == "drop") return [](Env&, ProgramContext&) { return Verdict::drop(); };
  if (s == "tx") return [](Env&, ProgramContext&) { return Verdict::tx(); };
  if (s == "count")
    return [](Env& env, ProgramContext&) {
      auto v = env.map_lookup(env.map(0), 0u);
      if (v) v->bytes().store_le<std::uint64_t>(0, v->bytes().load_le<std::uint64_t>(0) + 1);
      return Verdict::pass();
    };
  if (s == "oob")
    return [](Env& env, ProgramContext&) {
      auto p = env.packet();
      return Verdict(p.at(p.size()));
    };
  if (s == "double_lock") {
    auto* cell = &host.create_spinlock("demo.lock");
    return [cell](Env& env, ProgramContext&) {
      auto a = env.spin_lock(*cell);
      auto b = env.spin_lock(*cell);
      return Verdict::pass();
    };
  }
  if (s == "recurse") {
    const auto* node = m.callgraph.find(s);
    const std::size_t frame = node ? node->frame_bytes : 0;
    return [frame](Env& env, ProgramContext& ctx) {
      recurse(env, frame, ctx.args[0]);
      return Verdict::pass();
    };
  }
  if (s == "spin")
    return [](Env&, ProgramContext&) {
      for (;;) asm volatile("");
      return Verdict::pass();
    };
  if (s == bmc::kIngressSymbol) return bmc::make_ingress(host, {});
  if (s == bmc::kIngressFaultySymbol) return bmc::make_ingress_faulty(host, {});
  if (s == bmc::kEgressSymbol) return bmc::make_egress(host, {});
  return nullptr;
}

std::vector<std::string> symbols() {
  return {"pass", "drop", "tx", "count", "oob", "double_lock", "recurse", "spin",
          std::string(bmc::kIngressSymbol), std::string(bmc::kIngressFaultySymbol),
          std::string(bmc::kEgressSymbol)};
}

}  // namespace exthost::programs
