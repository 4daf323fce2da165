#pragma once

#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

#include "exthost/panic.hpp"

namespace exthost {

template <class T>
concept Scalar = std::integral<T> && !std::same_as<T, bool> && sizeof(T) <= 8;

/// Length-carrying window over bytes owned elsewhere. Every access is checked
/// against the length; a violation raises an OutOfBounds panic before any
/// byte is touched.
class BoundedView {
 public:
  constexpr BoundedView() = default;
  explicit BoundedView(std::span<std::uint8_t> bytes) noexcept : data_(bytes) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// True iff [offset, offset+len) lies inside the view.
  bool contains(std::size_t offset, std::size_t len) const noexcept {
    return offset <= data_.size() && len <= data_.size() - offset;
  }

  BoundedView subview(std::size_t offset, std::size_t len) const {
    check(offset, len, "subview");
    return BoundedView(data_.subspan(offset, len));
  }
  /// Everything from `offset` to the end.
  BoundedView tail(std::size_t offset) const {
    check(offset, 0, "tail");
    return BoundedView(data_.subspan(offset));
  }

  std::span<const std::uint8_t> read(std::size_t offset, std::size_t len) const {
    check(offset, len, "read");
    return data_.subspan(offset, len);
  }
  void read_into(std::size_t offset, std::span<std::uint8_t> out) const {
    check(offset, out.size(), "read");
    std::memcpy(out.data(), data_.data() + offset, out.size());
  }
  void write(std::size_t offset, std::span<const std::uint8_t> bytes) const {
    check(offset, bytes.size(), "write");
    std::memcpy(data_.data() + offset, bytes.data(), bytes.size());
  }
  void write(std::size_t offset, std::string_view text) const {
    write(offset, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  void fill(std::uint8_t value) const noexcept { std::memset(data_.data(), value, data_.size()); }

  std::uint8_t at(std::size_t i) const {
    check(i, 1, "read");
    return data_[i];
  }
  void set(std::size_t i, std::uint8_t v) const {
    check(i, 1, "write");
    data_[i] = v;
  }

  /// Little-endian scalar load/store.
  template <Scalar T>
  T load_le(std::size_t offset) const {
    check(offset, sizeof(T), "read");
    T v;
    std::memcpy(&v, data_.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    return v;
  }
  template <Scalar T>
  void store_le(std::size_t offset, T v) const {
    check(offset, sizeof(T), "write");
    if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
    std::memcpy(data_.data() + offset, &v, sizeof(T));
  }

  // Non-panicking queries.
  bool starts_with(std::string_view prefix) const noexcept {
    return prefix.size() <= data_.size() &&
           std::memcmp(data_.data(), prefix.data(), prefix.size()) == 0;
  }
  bool equals(std::span<const std::uint8_t> other) const noexcept {
    return other.size() == data_.size() &&
           (data_.empty() || std::memcmp(data_.data(), other.data(), other.size()) == 0);
  }
  std::string_view as_chars() const noexcept {
    return {reinterpret_cast<const char*>(data_.data()), data_.size()};
  }

 private:
  template <class T>
  static T byteswap(T v) noexcept {
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    std::make_unsigned_t<T> r = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) r = static_cast<decltype(r)>((r << 8) | ((u >> (8 * i)) & 0xff));
    return static_cast<T>(r);
  }

  void check(std::size_t offset, std::size_t len, const char* op) const {
    if (!contains(offset, len)) [[unlikely]]
      raise_panic(PanicReason::OutOfBounds, "%s [%zu, +%zu) outside view of %zu bytes", op, offset,
                  len, data_.size());
  }

  std::span<std::uint8_t> data_;
};

}  // namespace exthost
