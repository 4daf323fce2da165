#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "exthost/view.hpp"

namespace exthost {

enum class ScalarKind : std::uint8_t { U8, U16, U32, U64, I8, I16, I32, I64, Reserved };

std::string_view to_string(ScalarKind k) noexcept;
/// Byte width of a scalar kind; 0 for Reserved (any width).
std::size_t scalar_width(ScalarKind k) noexcept;
bool is_signed(ScalarKind k) noexcept;

/// A field as requested at registration. `kind` is free text so that layouts
/// naming non-scalar members ("handle", "ptr", ...) can be rejected.
struct FieldSpec {
  std::string name;
  std::size_t offset = 0;
  std::size_t bytes = 0;
  std::string kind;
};

struct FieldLayout {
  std::string name;
  std::size_t offset;
  std::size_t bytes;
  ScalarKind kind;
};

/// Layout of a record that may be overlaid on raw bytes. Only scalars, no
/// padding gaps, no pointer-like members. Instances exist only inside a
/// TypeRegistry.
class TypeDescriptor {
 public:
  const std::string& type_id() const noexcept { return type_id_; }
  std::size_t total_bytes() const noexcept { return total_bytes_; }
  const std::vector<FieldLayout>& fields() const noexcept { return fields_; }
  /// Index of `name`; throws Error(InvalidDescriptor) if absent.
  std::size_t field_index(std::string_view name) const;

 private:
  friend class TypeRegistry;
  TypeDescriptor(std::string id, std::vector<FieldLayout> fields, std::size_t total)
      : type_id_(std::move(id)), fields_(std::move(fields)), total_bytes_(total) {}

  std::string type_id_;
  std::vector<FieldLayout> fields_;
  std::size_t total_bytes_;
};

/// Typed overlay returned by a checked transmute. All field reads and writes
/// stay within the descriptor's footprint, which is known to fit the view.
class TypedRecord {
 public:
  const TypeDescriptor& descriptor() const noexcept { return *desc_; }
  BoundedView bytes() const noexcept { return view_; }

  std::uint64_t get_unsigned(std::size_t field) const;
  std::int64_t get_signed(std::size_t field) const;
  void set(std::size_t field, std::uint64_t value) const;

  std::uint64_t get_unsigned(std::string_view name) const {
    return get_unsigned(desc_->field_index(name));
  }
  std::int64_t get_signed(std::string_view name) const {
    return get_signed(desc_->field_index(name));
  }
  void set(std::string_view name, std::uint64_t value) const { set(desc_->field_index(name), value); }

 private:
  friend TypedRecord transmute_checked(BoundedView, const TypeDescriptor&);
  TypedRecord(BoundedView v, const TypeDescriptor* d) : view_(v), desc_(d) {}

  const FieldLayout& field(std::size_t i) const;

  BoundedView view_;
  const TypeDescriptor* desc_;
};

/// Overlays `desc` on the start of `view`. Raises a TransmuteViolation panic
/// if the record does not fit.
TypedRecord transmute_checked(BoundedView view, const TypeDescriptor& desc);

/// Framework-owned set of transmutable layouts. Registration validates the
/// layout; descriptors are never copied out, only referenced.
class TypeRegistry {
 public:
  /// Throws Error(InvalidDescriptor) on a non-scalar field, overlap, gap,
  /// width mismatch, or a duplicate type_id.
  const TypeDescriptor& register_type(std::string type_id, std::vector<FieldSpec> fields,
                                      std::size_t total_bytes);
  const TypeDescriptor* find(std::string_view type_id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<TypeDescriptor>, std::less<>> types_;
};

}  // namespace exthost
