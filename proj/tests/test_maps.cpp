#include <gtest/gtest.h>

#include <map>
#include <random>
#include <thread>

#include "exthost/env.hpp"
#include "exthost/maps.hpp"
#include "test_util.hpp"

using namespace exthost;
using namespace exthost::testing;

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace

TEST(Fnv, KnownVectors) {
  // Reference values of 32-bit FNV-1a.
  EXPECT_EQ(fnv1a32({}), 0x811c9dc5u);
  const std::uint8_t a[] = {'a'};
  EXPECT_EQ(fnv1a32(a), 0xe40c292cu);
  const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  EXPECT_EQ(fnv1a32(foobar), 0xbf9cf968u);
  EXPECT_NE(fnv1a32(foobar, 1), fnv1a32(foobar));
}

TEST(HashMap, ModelEquivalence) {
  std::mt19937_64 rng(42);
  MapSpec spec{"h", MapKind::Hash, 4, 12, 64};
  auto m = Map::create(spec, 1, 5);
  std::map<Bytes, Bytes> model;
  for (int i = 0; i < 10000; ++i) {
    std::uint32_t k = static_cast<std::uint32_t>(rng() % 100);
    auto key = Map::index_key(k);
    Bytes kb(key.begin(), key.end());
    switch (rng() % 3) {
      case 0: {
        auto got = m->get(0, key);
        auto it = model.find(kb);
        ASSERT_EQ(got.has_value(), it != model.end());
        if (got) ASSERT_EQ(*got, it->second);
        break;
      }
      case 1: {
        auto v = random_bytes(rng, 12);
        auto st = m->update(0, key, v);
        if (model.count(kb) || model.size() < spec.max_entries) {
          ASSERT_EQ(st, MapStatus::Ok);
          model[kb] = v;
        } else {
          ASSERT_EQ(st, MapStatus::Full);
        }
        break;
      }
      case 2:
        ASSERT_EQ(m->erase(0, key), model.erase(kb) == 1);
        break;
    }
    ASSERT_EQ(m->entry_count(), model.size());
  }
  EXPECT_EQ(m->outstanding_refs(), 0u);
}

TEST(HashMap, FullAtCapacity) {
  MapSpec spec{"h", MapKind::Hash, 4, 4, 8};
  auto m = Map::create(spec, 1);
  Bytes v(4, 1);
  for (std::uint32_t i = 0; i < 8; ++i) ASSERT_EQ(m->update(0, Map::index_key(i), v), MapStatus::Ok);
  EXPECT_EQ(m->update(0, Map::index_key(99), v), MapStatus::Full);
  EXPECT_EQ(m->update(0, Map::index_key(3), v), MapStatus::Ok);
  EXPECT_TRUE(m->erase(0, Map::index_key(3)));
  EXPECT_EQ(m->update(0, Map::index_key(99), v), MapStatus::Ok);
}

TEST(ArrayMap, ModelEquivalence) {
  std::mt19937_64 rng(9);
  MapSpec spec{"a", MapKind::Array, 4, 8, 32};
  auto m = Map::create(spec, 1);
  std::map<std::uint32_t, Bytes> model;
  for (int i = 0; i < 10000; ++i) {
    std::uint32_t k = static_cast<std::uint32_t>(rng() % 40);
    if (rng() % 2) {
      auto v = random_bytes(rng, 8);
      auto st = m->update(0, k < 32 ? Map::index_key(k) : Map::index_key(k), v);
      ASSERT_EQ(st, k < 32 ? MapStatus::Ok : MapStatus::NoSuchIndex);
      if (k < 32) model[k] = v;
    } else {
      auto got = m->get(0, k);
      if (k >= 32) {
        ASSERT_FALSE(got);
      } else {
        ASSERT_TRUE(got);
        ASSERT_EQ(*got, model.count(k) ? model[k] : Bytes(8, 0));
      }
    }
  }
  EXPECT_FALSE(m->erase(0, Map::index_key(0)));
}

TEST(PerWorkerMap, LanesAreIndependent) {
  MapSpec spec{"p", MapKind::PerWorker, 4, 8, 4};
  auto m = Map::create(spec, 3);
  Bytes one(8, 1), two(8, 2);
  m->update(0, Map::index_key(1), one);
  m->update(2, Map::index_key(1), two);
  EXPECT_EQ(*m->get(0, 1u), one);
  EXPECT_EQ(*m->get(1, 1u), Bytes(8, 0));
  EXPECT_EQ(*m->get(2, 1u), two);
}

TEST(HashMap, DeleteDefersReclamationWhilePinned) {
  MapSpec spec{"h", MapKind::Hash, 4, 16, 8};
  auto m = Map::create(spec, 2);
  Bytes v(16, 7);
  m->update(0, Map::index_key(1), v);
  auto ref = m->acquire(1, Map::index_key(1));
  ASSERT_TRUE(ref);
  EXPECT_TRUE(m->erase(0, Map::index_key(1)));
  EXPECT_EQ(m->live_blocks(), 1u);
  EXPECT_EQ(ref->data[15], 7);
  m->release(ref->token);
  EXPECT_EQ(m->live_blocks(), 0u);
}

TEST(HashMap, DeleteFromOtherWorkerWhileGuardLive) {
  Host host(HostConfig{.num_workers = 2});
  auto spec = hash_spec("shared", 4, 16, 8);
  std::atomic<int> phase{0};
  bool existed = false;
  std::size_t blocks_during = 0;
  auto reader = host.load_extension(simple_manifest("reader", {spec}), [&](Env& env, ProgramContext&) {
    auto ref = env.map_lookup(env.map(0), 1u);
    if (!ref) return Verdict::drop();
    phase = 1;
    while (phase.load() != 2) std::this_thread::yield();
    // still readable after deletion
    return ref->bytes().at(0) == 9 ? Verdict::pass() : Verdict::drop();
  });
  auto deleter = host.load_extension(simple_manifest("deleter", {spec}), [&](Env& env, ProgramContext&) {
    auto key = Map::index_key(1);
    existed = env.map_delete(env.map(0), key);
    blocks_during = env.map(0).live_blocks();
    return Verdict::pass();
  });
  auto map = host.find_map("shared");
  map->update(0, Map::index_key(1), Bytes(16, 9));
  DispatchOutcome r;
  std::thread t([&] {
    ProgramContext ctx;
    r = host.dispatch(0, reader, ctx);
  });
  while (phase.load() != 1) std::this_thread::yield();
  ProgramContext ctx;
  host.dispatch(1, deleter, ctx);
  phase = 2;
  t.join();
  EXPECT_TRUE(existed);
  EXPECT_EQ(blocks_during, 1u);
  EXPECT_EQ(r.verdict, Verdict::pass());
  EXPECT_EQ(map->live_blocks(), 0u);
  EXPECT_EQ(map->outstanding_refs(), 0u);
}

TEST(Env, LookupMissAndRoundTrip) {
  Host host;
  auto h = host.load_extension(
      simple_manifest("rt", {hash_spec("h", 8, 8, 4), array_spec("a", 8, 4)}),
      [](Env& env, ProgramContext&) {
        std::array<std::uint8_t, 8> key{1, 2, 3, 4, 5, 6, 7, 8};
        std::array<std::uint8_t, 8> val{9, 9, 9, 9, 1, 2, 3, 4};
        if (env.map_lookup(env.map("h"), key)) return Verdict(1);
        if (env.map_update(env.map("h"), key, val) != MapStatus::Ok) return Verdict(2);
        auto ref = env.map_lookup(env.map("h"), key);
        if (!ref || !ref->bytes().equals(val)) return Verdict(3);
        if (ref->bytes().size() != 8) return Verdict(4);
        if (env.map_lookup(env.map("a"), 4u)) return Verdict(5);  // index == max_entries
        if (env.worker().cleanup_registry.size() != 1) return Verdict(6);
        return Verdict(0);
      });
  ProgramContext ctx;
  auto out = host.dispatch(0, h, ctx);
  ASSERT_FALSE(out.panicked());
  EXPECT_EQ(out.verdict.raw(), 0);
  EXPECT_EQ(host.find_map("h")->outstanding_refs(), 0u);
}

TEST(Env, KeySizeMismatchPanics) {
  Host host;
  auto h = host.load_extension(simple_manifest("ks", {hash_spec("h", 8, 8, 4)}),
                               [](Env& env, ProgramContext&) {
                                 std::array<std::uint8_t, 3> key{};
                                 (void)env.map_lookup(env.map(0), key);
                                 return Verdict::pass();
                               });
  ProgramContext ctx;
  auto out = host.dispatch(0, h, ctx);
  ASSERT_TRUE(out.panicked());
  EXPECT_EQ(out.panic->reason, PanicReason::OutOfBounds);
}

TEST(Env, ValueRefReleasedByPanic) {
  Host host;
  auto h = host.load_extension(simple_manifest("vp", {array_spec("a", 8, 4)}),
                               [](Env& env, ProgramContext&) -> Verdict {
                                 auto ref = env.map_lookup(env.map(0), 2u);
                                 env.panic("with a pinned value");
                               });
  auto map = host.find_map("a");
  ProgramContext ctx;
  ASSERT_TRUE(host.dispatch(0, h, ctx).panicked());
  EXPECT_EQ(map->outstanding_refs(), 0u);
}

TEST(Statics, ConcurrentAdds) {
  Host host(HostConfig{.num_workers = 4});
  auto& var = host.register_static("counter");
  EXPECT_EQ(var.read(), 0);
  auto h = host.load_extension(simple_manifest("inc"), [&](Env&, ProgramContext&) {
    for (int i = 0; i < 1000; ++i) var.add(1);
    var.add(0);
    return Verdict::pass();
  });
  std::vector<std::thread> ts;
  for (unsigned w = 0; w < 4; ++w)
    ts.emplace_back([&, w] {
      ProgramContext ctx;
      host.dispatch(w, h, ctx);
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(var.read(), 4000);
  EXPECT_EQ(&host.static_var("counter"), &var);
  try {
    host.static_var("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownVar);
  }
}
