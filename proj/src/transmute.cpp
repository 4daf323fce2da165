#include "exthost/transmute.hpp"

#include <algorithm>

namespace exthost {

std::string_view to_string(ScalarKind k) noexcept {
  switch (k) {
    case ScalarKind::U8: return "u8";
    case ScalarKind::U16: return "u16";
    case ScalarKind::U32: return "u32";
    case ScalarKind::U64: return "u64";
    case ScalarKind::I8: return "i8";
    case ScalarKind::I16: return "i16";
    case ScalarKind::I32: return "i32";
    case ScalarKind::I64: return "i64";
    case ScalarKind::Reserved: return "reserved";
  }
  return "?";
}

std::size_t scalar_width(ScalarKind k) noexcept {
  switch (k) {
    case ScalarKind::U8:
    case ScalarKind::I8: return 1;
    case ScalarKind::U16:
    case ScalarKind::I16: return 2;
    case ScalarKind::U32:
    case ScalarKind::I32: return 4;
    case ScalarKind::U64:
    case ScalarKind::I64: return 8;
    case ScalarKind::Reserved: return 0;
  }
  return 0;
}

bool is_signed(ScalarKind k) noexcept {
  return k == ScalarKind::I8 || k == ScalarKind::I16 || k == ScalarKind::I32 ||
         k == ScalarKind::I64;
}

namespace {

std::optional<ScalarKind> parse_scalar(std::string_view s) {
  for (auto k : {ScalarKind::U8, ScalarKind::U16, ScalarKind::U32, ScalarKind::U64, ScalarKind::I8,
                 ScalarKind::I16, ScalarKind::I32, ScalarKind::I64, ScalarKind::Reserved})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

}  // namespace

std::size_t TypeDescriptor::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  throw Error(ErrorCode::InvalidDescriptor,
              "type '" + type_id_ + "' has no field '" + std::string(name) + "'");
}

const FieldLayout& TypedRecord::field(std::size_t i) const {
  if (i >= desc_->fields().size())
    raise_panic(PanicReason::TransmuteViolation, "field %zu out of range for '%s'", i,
                desc_->type_id().c_str());
  const auto& f = desc_->fields()[i];
  if (f.kind == ScalarKind::Reserved)
    raise_panic(PanicReason::TransmuteViolation, "field '%s' is reserved", f.name.c_str());
  return f;
}

std::uint64_t TypedRecord::get_unsigned(std::size_t i) const {
  const auto& f = field(i);
  switch (f.bytes) {
    case 1: return view_.load_le<std::uint8_t>(f.offset);
    case 2: return view_.load_le<std::uint16_t>(f.offset);
    case 4: return view_.load_le<std::uint32_t>(f.offset);
    default: return view_.load_le<std::uint64_t>(f.offset);
  }
}

std::int64_t TypedRecord::get_signed(std::size_t i) const {
  const auto& f = field(i);
  switch (f.bytes) {
    case 1: return view_.load_le<std::int8_t>(f.offset);
    case 2: return view_.load_le<std::int16_t>(f.offset);
    case 4: return view_.load_le<std::int32_t>(f.offset);
    default: return view_.load_le<std::int64_t>(f.offset);
  }
}

void TypedRecord::set(std::size_t i, std::uint64_t value) const {
  const auto& f = field(i);
  switch (f.bytes) {
    case 1: view_.store_le(f.offset, static_cast<std::uint8_t>(value)); break;
    case 2: view_.store_le(f.offset, static_cast<std::uint16_t>(value)); break;
    case 4: view_.store_le(f.offset, static_cast<std::uint32_t>(value)); break;
    default: view_.store_le(f.offset, value); break;
  }
}

TypedRecord transmute_checked(BoundedView view, const TypeDescriptor& desc) {
  if (desc.total_bytes() > view.size())
    raise_panic(PanicReason::TransmuteViolation, "'%s' needs %zu bytes, view has %zu",
                desc.type_id().c_str(), desc.total_bytes(), view.size());
  return TypedRecord(view.subview(0, desc.total_bytes()), &desc);
}

const TypeDescriptor& TypeRegistry::register_type(std::string type_id, std::vector<FieldSpec> fields,
                                                  std::size_t total_bytes) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidDescriptor, "type '" + type_id + "': " + what);
  };
  if (type_id.empty()) fail("empty type_id");
  std::sort(fields.begin(), fields.end(),
            [](const FieldSpec& a, const FieldSpec& b) { return a.offset < b.offset; });

  std::vector<FieldLayout> layout;
  std::size_t cursor = 0;
  for (const auto& f : fields) {
    auto kind = parse_scalar(f.kind);
    if (!kind) fail("field '" + f.name + "' has non-scalar kind '" + f.kind + "'");
    if (f.bytes == 0) fail("field '" + f.name + "' is empty");
    if (*kind != ScalarKind::Reserved && f.bytes != scalar_width(*kind))
      fail("field '" + f.name + "' width does not match " + f.kind);
    if (f.offset < cursor) fail("field '" + f.name + "' overlaps its predecessor");
    if (f.offset > cursor) fail("implicit padding before '" + f.name + "'");
    if (f.offset + f.bytes > total_bytes) fail("field '" + f.name + "' exceeds total size");
    for (const auto& l : layout)
      if (l.name == f.name) fail("duplicate field '" + f.name + "'");
    layout.push_back({f.name, f.offset, f.bytes, *kind});
    cursor = f.offset + f.bytes;
  }
  if (cursor != total_bytes) fail("implicit trailing padding");

  std::lock_guard lk(mu_);
  if (types_.contains(type_id)) fail("already registered");
  auto desc = std::unique_ptr<TypeDescriptor>(new TypeDescriptor(type_id, std::move(layout), total_bytes));
  auto& ref = *desc;
  types_.emplace(type_id, std::move(desc));
  return ref;
}

const TypeDescriptor* TypeRegistry::find(std::string_view type_id) const {
  std::lock_guard lk(mu_);
  auto it = types_.find(type_id);
  return it == types_.end() ? nullptr : it->second.get();
}

std::size_t TypeRegistry::size() const {
  std::lock_guard lk(mu_);
  return types_.size();
}

}  // namespace exthost
