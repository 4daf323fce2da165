#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "exthost/transmute.hpp"
#include "exthost/view.hpp"

using namespace exthost;

namespace {

template <class F>
std::optional<PanicReason> panic_of(F&& f) {
  try {
    f();
  } catch (const PanicError& e) {
    return e.reason();
  }
  return std::nullopt;
}

std::vector<std::uint8_t> buffer(std::size_t n) {
  std::vector<std::uint8_t> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i);
  return b;
}

}  // namespace

TEST(View, ExactFitAndOverrun) {
  auto b = buffer(64);
  BoundedView v(b);
  EXPECT_FALSE(panic_of([&] { (void)v.read(0, 64); }));
  EXPECT_EQ(panic_of([&] { (void)v.read(60, 8); }), PanicReason::OutOfBounds);
  EXPECT_EQ(panic_of([&] { (void)v.read(65, 0); }), PanicReason::OutOfBounds);
  EXPECT_FALSE(panic_of([&] { (void)v.read(64, 0); }));
}

TEST(View, SubviewArithmetic) {
  auto b = buffer(64);
  BoundedView v(b);
  auto s = v.subview(8, 16);
  EXPECT_EQ(s.size(), 16u);
  EXPECT_EQ(s.at(15), 8 + 15);
  EXPECT_EQ(panic_of([&] { (void)s.at(16); }), PanicReason::OutOfBounds);
  EXPECT_EQ(panic_of([&] { (void)v.subview(60, 8); }), PanicReason::OutOfBounds);
  EXPECT_EQ(v.tail(60).size(), 4u);
}

TEST(View, OverflowingOffsetsRejected) {
  auto b = buffer(16);
  BoundedView v(b);
  EXPECT_EQ(panic_of([&] { (void)v.read(SIZE_MAX, 2); }), PanicReason::OutOfBounds);
  EXPECT_EQ(panic_of([&] { (void)v.read(2, SIZE_MAX); }), PanicReason::OutOfBounds);
}

TEST(View, LittleEndianScalars) {
  std::vector<std::uint8_t> b(8, 0);
  BoundedView v(b);
  v.store_le<std::uint32_t>(0, 0x11223344u);
  EXPECT_EQ(b[0], 0x44);
  EXPECT_EQ(b[3], 0x11);
  EXPECT_EQ(v.load_le<std::uint16_t>(2), 0x1122);
  EXPECT_EQ(panic_of([&] { v.store_le<std::uint64_t>(1, 0); }), PanicReason::OutOfBounds);
}

TEST(Transmute, RegisterAndOverlay) {
  TypeRegistry reg;
  const auto& d = reg.register_type("hdr", {{"a", 0, 4, "u32"}, {"b", 4, 2, "u16"}, {"c", 6, 2, "i16"}}, 8);
  std::vector<std::uint8_t> b{1, 0, 0, 0, 2, 0, 0xff, 0xff};
  auto rec = transmute_checked(BoundedView(b), d);
  EXPECT_EQ(rec.get_unsigned("a"), 1u);
  EXPECT_EQ(rec.get_unsigned("b"), 2u);
  EXPECT_EQ(rec.get_signed("c"), -1);
  rec.set("b", 0x0304);
  EXPECT_EQ(b[4], 0x04);
  std::vector<std::uint8_t> small(6);
  EXPECT_EQ(panic_of([&] { transmute_checked(BoundedView(small), d); }), PanicReason::TransmuteViolation);
}

TEST(Transmute, RegistrationRejectsBadLayouts) {
  TypeRegistry reg;
  auto code = [&](std::vector<FieldSpec> f, std::size_t total) {
    try {
      reg.register_type("t" + std::to_string(reg.size()) + std::to_string(f.size()) + std::to_string(total), f, total);
    } catch (const Error& e) {
      return std::optional<ErrorCode>(e.code());
    }
    return std::optional<ErrorCode>();
  };
  EXPECT_EQ(code({{"h", 0, 8, "handle"}}, 8), ErrorCode::InvalidDescriptor);
  EXPECT_EQ(code({{"p", 0, 8, "ptr"}}, 8), ErrorCode::InvalidDescriptor);
  EXPECT_EQ(code({{"a", 0, 4, "u32"}, {"b", 2, 2, "u16"}}, 4), ErrorCode::InvalidDescriptor);  // overlap
  EXPECT_EQ(code({{"a", 0, 1, "u8"}, {"b", 4, 4, "u32"}}, 8), ErrorCode::InvalidDescriptor);   // gap
  EXPECT_EQ(code({{"a", 0, 4, "u32"}}, 8), ErrorCode::InvalidDescriptor);                      // trailing
  EXPECT_EQ(code({{"a", 0, 2, "u32"}}, 2), ErrorCode::InvalidDescriptor);                      // width
  EXPECT_FALSE(code({{"a", 0, 1, "u8"}, {"pad", 1, 3, "reserved"}, {"b", 4, 4, "u32"}}, 8));
  reg.register_type("dup", {{"a", 0, 1, "u8"}}, 1);
  EXPECT_THROW(reg.register_type("dup", {{"a", 0, 1, "u8"}}, 1), Error);
}

TEST(Transmute, ReservedFieldsAreNotAccessible) {
  TypeRegistry reg;
  const auto& d = reg.register_type("r", {{"a", 0, 1, "u8"}, {"pad", 1, 3, "reserved"}}, 4);
  std::vector<std::uint8_t> b(4);
  auto rec = transmute_checked(BoundedView(b), d);
  EXPECT_EQ(panic_of([&] { (void)rec.get_unsigned("pad"); }), PanicReason::TransmuteViolation);
}

TEST(View, FuzzWithCanaries) {
  constexpr std::size_t kPad = 32;
  constexpr std::uint8_t kCanary = 0xA5;
  std::mt19937_64 rng(2024);
  TypeRegistry reg;
  const auto& d16 = reg.register_type("d16", {{"a", 0, 8, "u64"}, {"b", 8, 4, "u32"}, {"c", 12, 4, "i32"}}, 16);
  for (int iter = 0; iter < 20000; ++iter) {
    const std::size_t n = rng() % 64;
    std::vector<std::uint8_t> backing(n + 2 * kPad, kCanary);
    BoundedView v(std::span(backing.data() + kPad, n));
    const std::size_t off = rng() % (n + 9), len = rng() % 17;
    const bool fits = off + len <= n;
    std::optional<PanicReason> got;
    switch (rng() % 5) {
      case 0: got = panic_of([&] { (void)v.read(off, len); }); break;
      case 1: {
        std::vector<std::uint8_t> data(len, 0x11);
        got = panic_of([&] { v.write(off, data); });
        break;
      }
      case 2: got = panic_of([&] { (void)v.subview(off, len).fill(0x22); }); break;
      case 3: {
        got = panic_of([&] { v.store_le<std::uint64_t>(off, ~0ull); });
        ASSERT_EQ(got.has_value(), !(off + 8 <= n));
        goto canaries;
      }
      case 4: {
        auto sub = BoundedView(std::span(backing.data() + kPad, std::min(off, n)));
        got = panic_of([&] { transmute_checked(sub, d16).set("a", ~0ull); });
        ASSERT_EQ(got.has_value(), std::min(off, n) < 16);
        if (got) ASSERT_EQ(*got, PanicReason::TransmuteViolation);
        goto canaries;
      }
    }
    ASSERT_EQ(got.has_value(), !fits) << "off " << off << " len " << len << " n " << n;
    if (got) ASSERT_EQ(*got, PanicReason::OutOfBounds);
  canaries:
    for (std::size_t i = 0; i < kPad; ++i) {
      ASSERT_EQ(backing[i], kCanary);
      ASSERT_EQ(backing[kPad + n + i], kCanary);
    }
  }
}
