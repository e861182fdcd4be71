#include "medguard/record.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "medguard/error.hpp"

namespace medguard {
namespace {

constexpr std::string_view kKindHealthRecord = "health_record";
constexpr std::string_view kKindCommand = "prescription_command";

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::invalid_record, what);
}

void require_text(std::string_view s, std::string_view field) {
  require(valid_utf8(s), std::string(field) + " is not valid UTF-8");
}

// ---- encoding --------------------------------------------------------------

void put_u32(Bytes& out, std::size_t v) {
  require(v <= std::numeric_limits<std::uint32_t>::max(), "field too large to encode");
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_chunk(Bytes& out, std::string_view bytes) {
  put_u32(out, bytes.size());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

void put_chunk(Bytes& out, const Bytes& bytes) {
  put_u32(out, bytes.size());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

/// Collects (key, value) pairs and writes them key-sorted.
class FieldWriter {
 public:
  void text(std::string key, std::string_view value) { fields_.emplace(std::move(key), Bytes(value.begin(), value.end())); }
  void integer(std::string key, std::int64_t value) { text(std::move(key), std::to_string(value)); }
  void nested(std::string key, Bytes value) { fields_.emplace(std::move(key), std::move(value)); }

  Bytes finish() const {
    Bytes out;
    put_u32(out, fields_.size());
    for (const auto& [key, value] : fields_) {
      put_chunk(out, key);
      put_chunk(out, value);
    }
    return out;
  }

 private:
  std::map<std::string, Bytes> fields_;
};

Bytes encode_list(const std::vector<Bytes>& items) {
  Bytes out;
  put_u32(out, items.size());
  for (const auto& item : items) put_chunk(out, item);
  return out;
}

// ---- decoding --------------------------------------------------------------

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed_blob, what); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32() {
    if (data_.size() - pos_ < 4) malformed("truncated length prefix");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  std::span<const std::uint8_t> chunk() {
    const std::uint32_t n = u32();
    if (data_.size() - pos_ < n) malformed("truncated field");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void expect_end() const {
    if (pos_ != data_.size()) malformed("trailing bytes after encoding");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string to_string(std::span<const std::uint8_t> bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

using FieldMap = std::map<std::string, std::span<const std::uint8_t>, std::less<>>;

FieldMap read_fields(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint32_t count = r.u32();
  FieldMap fields;
  std::string previous;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = to_string(r.chunk());
    if (i > 0 && !(previous < key)) malformed("field keys not strictly ascending");
    auto value = r.chunk();
    previous = key;
    fields.emplace(std::move(key), value);
  }
  r.expect_end();
  return fields;
}

std::vector<std::span<const std::uint8_t>> read_list(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint32_t count = r.u32();
  std::vector<std::span<const std::uint8_t>> items;
  for (std::uint32_t i = 0; i < count; ++i) items.push_back(r.chunk());
  r.expect_end();
  return items;
}

void expect_keys(const FieldMap& fields, std::initializer_list<std::string_view> keys) {
  if (fields.size() != keys.size()) malformed("unexpected field count");
  for (auto k : keys) {
    if (!fields.contains(k)) malformed("missing field '" + std::string(k) + "'");
  }
}

std::int64_t read_integer(std::span<const std::uint8_t> bytes) {
  const std::string text = to_string(bytes);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) malformed("bad integer '" + text + "'");
  if (std::to_string(v) != text) malformed("non-canonical integer '" + text + "'");
  return v;
}

std::string read_text(const FieldMap& f, std::string_view key) {
  std::string s = to_string(f.find(key)->second);
  if (!valid_utf8(s)) malformed("field '" + std::string(key) + "' is not UTF-8");
  return s;
}

std::int64_t read_int(const FieldMap& f, std::string_view key) { return read_integer(f.find(key)->second); }

TimeOfDay read_time(const FieldMap& f, std::string_view key) {
  const std::int64_t v = read_int(f, key);
  if (v < 0 || v >= TimeOfDay::kSecondsPerDay) malformed("time of day out of range");
  return TimeOfDay{static_cast<std::uint32_t>(v)};
}

HealthRecord decode_health_record(const FieldMap& f) {
  expect_keys(f, {"glucose_readings", "kind", "patient_id", "profile", "timestamp"});
  HealthRecord r;
  r.patient_id = read_text(f, "patient_id");
  r.timestamp = read_int(f, "timestamp");
  for (auto item : read_list(f.find("glucose_readings")->second)) {
    const FieldMap g = read_fields(item);
    expect_keys(g, {"meal", "mg_dl", "time"});
    auto meal = parse_meal_tag(read_text(g, "meal"));
    if (!meal) malformed("unknown meal tag");
    const std::int64_t mg = read_int(g, "mg_dl");
    if (mg < std::numeric_limits<std::int32_t>::min() || mg > std::numeric_limits<std::int32_t>::max()) {
      malformed("glucose value out of range");
    }
    r.glucose_readings.push_back({read_time(g, "time"), static_cast<std::int32_t>(mg), *meal});
  }
  for (const auto& [key, value] : read_fields(f.find("profile")->second)) {
    std::string v = to_string(value);
    if (!valid_utf8(key) || !valid_utf8(v)) malformed("profile entry is not UTF-8");
    r.profile.emplace(key, std::move(v));
  }
  try {
    validate(r);
  } catch (const Error& e) {
    malformed(e.what());
  }
  return r;
}

PrescriptionCommand decode_command(const FieldMap& f) {
  expect_keys(f, {"command_id", "issued_at", "issuer", "kind", "patient_id", "schedule"});
  PrescriptionCommand c;
  c.command_id = read_text(f, "command_id");
  c.issued_at = read_int(f, "issued_at");
  c.issuer = read_text(f, "issuer");
  c.patient_id = read_text(f, "patient_id");
  for (auto item : read_list(f.find("schedule")->second)) {
    const FieldMap e = read_fields(item);
    expect_keys(e, {"dose_mu", "rate_mu_per_h", "time"});
    c.schedule.push_back({read_time(e, "time"), Milliunits{read_int(e, "dose_mu")}, Milliunits{read_int(e, "rate_mu_per_h")}});
  }
  try {
    validate(c, SafetyLimits::unbounded());
  } catch (const Error& e) {
    malformed(e.what());
  }
  return c;
}

}  // namespace

// ---- small types -------------------------------------------------------------

TimeOfDay TimeOfDay::parse(std::string_view text) {
  auto field = [&](std::string_view part, int max) {
    int v = -1;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.size() != 2 || ec != std::errc{} || ptr != part.data() + part.size() || v < 0 || v > max) {
      throw Error(Errc::invalid_argument, "bad time of day '" + std::string(text) + "'");
    }
    return static_cast<std::uint32_t>(v);
  };
  if (text.size() != 5 && text.size() != 8) throw Error(Errc::invalid_argument, "bad time of day '" + std::string(text) + "'");
  if (text[2] != ':' || (text.size() == 8 && text[5] != ':')) {
    throw Error(Errc::invalid_argument, "bad time of day '" + std::string(text) + "'");
  }
  std::uint32_t s = field(text.substr(0, 2), 23) * 3600 + field(text.substr(3, 2), 59) * 60;
  if (text.size() == 8) s += field(text.substr(6, 2), 59);
  return TimeOfDay{s};
}

std::string TimeOfDay::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u:%02u:%02u", seconds / 3600, (seconds / 60) % 60, seconds % 60);
  return buf;
}

std::string_view to_string(MealTag tag) noexcept {
  switch (tag) {
    case MealTag::ac_breakfast: return "ac_breakfast";
    case MealTag::pc_breakfast: return "pc_breakfast";
    case MealTag::ac_dinner: return "ac_dinner";
    case MealTag::pc_dinner: return "pc_dinner";
    case MealTag::other: return "other";
  }
  return "other";
}

std::optional<MealTag> parse_meal_tag(std::string_view text) noexcept {
  for (auto tag : {MealTag::ac_breakfast, MealTag::pc_breakfast, MealTag::ac_dinner, MealTag::pc_dinner, MealTag::other}) {
    if (to_string(tag) == text) return tag;
  }
  return std::nullopt;
}

Milliunits Milliunits::from_units(double units) {
  if (!std::isfinite(units) || std::abs(units) > 1e12) throw Error(Errc::invalid_argument, "dose out of range");
  return Milliunits{std::llround(units * 1000.0)};
}

SafetyLimits SafetyLimits::unbounded() noexcept {
  return {Milliunits{std::numeric_limits<std::int64_t>::max()}, Milliunits{std::numeric_limits<std::int64_t>::max()}};
}

std::string RecordKey::to_string() const { return patient_id + "@" + std::to_string(timestamp); }

// ---- validation ------------------------------------------------------------

void validate(const HealthRecord& record) {
  require(!record.patient_id.empty(), "patient_id is empty");
  require_text(record.patient_id, "patient_id");
  require(record.timestamp >= 0, "timestamp is negative");
  for (std::size_t i = 0; i < record.glucose_readings.size(); ++i) {
    const auto& g = record.glucose_readings[i];
    require(g.mg_dl >= 0 && g.mg_dl <= kMaxGlucoseMgDl,
            "glucose value " + std::to_string(g.mg_dl) + " outside [0, 1000] mg/dL");
    require(g.time.seconds < TimeOfDay::kSecondsPerDay, "reading time of day out of range");
    require(i == 0 || record.glucose_readings[i - 1].time <= g.time, "reading times are not non-decreasing");
  }
  for (const auto& [key, value] : record.profile) {
    require_text(key, "profile key");
    require_text(value, "profile value");
  }
}

void validate(const PrescriptionCommand& command, const SafetyLimits& limits) {
  require(!command.command_id.empty(), "command_id is empty");
  require(!command.patient_id.empty(), "patient_id is empty");
  require(!command.issuer.empty(), "issuer is empty");
  require_text(command.command_id, "command_id");
  require_text(command.patient_id, "patient_id");
  require_text(command.issuer, "issuer");
  require(command.issued_at >= 0, "issued_at is negative");
  require(!command.schedule.empty(), "schedule is empty");
  for (const auto& e : command.schedule) {
    require(e.time.seconds < TimeOfDay::kSecondsPerDay, "schedule time of day out of range");
    require(e.dose.value > 0, "dose must be positive");
    require(e.rate_per_hour.value > 0, "rate must be positive");
    require(e.dose <= limits.max_dose, "dose exceeds max_dose");
    require(e.rate_per_hour <= limits.max_rate, "rate exceeds max_rate");
  }
}

// ---- canonical form ----------------------------------------------------------

Bytes canonical_serialize(const HealthRecord& record) {
  validate(record);
  std::vector<Bytes> readings;
  readings.reserve(record.glucose_readings.size());
  for (const auto& g : record.glucose_readings) {
    FieldWriter w;
    w.text("meal", to_string(g.meal));
    w.integer("mg_dl", g.mg_dl);
    w.integer("time", g.time.seconds);
    readings.push_back(w.finish());
  }
  FieldWriter profile;
  for (const auto& [key, value] : record.profile) profile.text(key, value);

  FieldWriter w;
  w.nested("glucose_readings", encode_list(readings));
  w.text("kind", kKindHealthRecord);
  w.text("patient_id", record.patient_id);
  w.nested("profile", profile.finish());
  w.integer("timestamp", record.timestamp);
  return w.finish();
}

Bytes canonical_serialize(const PrescriptionCommand& command, const SafetyLimits& limits) {
  validate(command, limits);
  std::vector<Bytes> entries;
  entries.reserve(command.schedule.size());
  for (const auto& e : command.schedule) {
    FieldWriter w;
    w.integer("dose_mu", e.dose.value);
    w.integer("rate_mu_per_h", e.rate_per_hour.value);
    w.integer("time", e.time.seconds);
    entries.push_back(w.finish());
  }
  FieldWriter w;
  w.text("command_id", command.command_id);
  w.integer("issued_at", command.issued_at);
  w.text("issuer", command.issuer);
  w.text("kind", kKindCommand);
  w.text("patient_id", command.patient_id);
  w.nested("schedule", encode_list(entries));
  return w.finish();
}

Bytes canonical_serialize(const Record& record) {
  return std::visit([](const auto& r) { return canonical_serialize(r); }, record);
}

Record parse_canonical(std::span<const std::uint8_t> payload) {
  const FieldMap fields = read_fields(payload);
  auto kind = fields.find("kind");
  if (kind == fields.end()) malformed("missing field 'kind'");
  const std::string k = to_string(kind->second);
  if (k == kKindHealthRecord) return decode_health_record(fields);
  if (k == kKindCommand) return decode_command(fields);
  malformed("unknown record kind '" + k + "'");
}

// ---- signing -----------------------------------------------------------------

Bytes SignedBlob::bytes() const {
  Bytes out;
  out.reserve(payload.size() + digest.size());
  out.insert(out.end(), payload.begin(), payload.end());
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

SignedBlob SignedBlob::from_bytes(std::span<const std::uint8_t> wire) {
  if (wire.size() < kMinWireBytes) {
    malformed("blob of " + std::to_string(wire.size()) + " bytes is shorter than " + std::to_string(kMinWireBytes));
  }
  SignedBlob blob;
  const std::size_t split = wire.size() - sha256::kDigestBytes;
  blob.payload.assign(wire.begin(), wire.begin() + static_cast<std::ptrdiff_t>(split));
  std::copy(wire.begin() + static_cast<std::ptrdiff_t>(split), wire.end(), blob.digest.begin());
  return blob;
}

namespace {
SignedBlob sign_payload(Bytes payload) {
  SignedBlob blob;
  blob.digest = sha256::digest(payload);
  blob.payload = std::move(payload);
  return blob;
}
}  // namespace

SignedBlob sign(const HealthRecord& record) { return sign_payload(canonical_serialize(record)); }

SignedBlob sign(const PrescriptionCommand& command, const SafetyLimits& limits) {
  return sign_payload(canonical_serialize(command, limits));
}

SignedBlob sign(const Record& record) { return sign_payload(canonical_serialize(record)); }

Verified verify(const SignedBlob& blob) {
  if (blob.payload.empty()) malformed("empty payload");
  const sha256::Digest computed = sha256::digest(blob.payload);
  if (computed != blob.digest) return TamperDetected{blob.digest, computed};
  return std::visit([](auto&& r) -> Verified { return std::move(r); }, parse_canonical(blob.payload));
}

Verified verify(std::span<const std::uint8_t> wire) { return verify(SignedBlob::from_bytes(wire)); }

}  // namespace medguard
