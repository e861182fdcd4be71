#pragma once

// Health records and prescription commands, their canonical byte encoding,
// and the digest-appended SignedBlob that carries them between parties.
//
// Canonical encoding: a field list is a u32 count followed by
// (u32 key length, key, u32 value length, value) entries with keys in
// strictly ascending byte order. Integers are decimal ASCII with no leading
// zeros; nested lists are a u32 count of length-prefixed elements. The
// parser accepts only this exact form, so parse/serialize is a bijection on
// valid payloads.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "medguard/sha256.hpp"

namespace medguard {

using Bytes = std::vector<std::uint8_t>;

/// Seconds since local midnight, [0, 86400).
struct TimeOfDay {
  std::uint32_t seconds = 0;

  static constexpr std::uint32_t kSecondsPerDay = 86400;

  /// Accepts "HH:MM" or "HH:MM:SS".
  static TimeOfDay parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
};

enum class MealTag { ac_breakfast, pc_breakfast, ac_dinner, pc_dinner, other };

std::string_view to_string(MealTag tag) noexcept;
std::optional<MealTag> parse_meal_tag(std::string_view text) noexcept;

struct GlucoseReading {
  TimeOfDay time;
  std::int32_t mg_dl = 0;
  MealTag meal = MealTag::other;

  friend bool operator==(const GlucoseReading&, const GlucoseReading&) = default;
};

inline constexpr std::int32_t kMaxGlucoseMgDl = 1000;

struct HealthRecord {
  std::string patient_id;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  std::vector<GlucoseReading> glucose_readings;
  std::map<std::string, std::string> profile;

  friend bool operator==(const HealthRecord&, const HealthRecord&) = default;
};

/// Insulin quantity in thousandths of a unit; keeps doses exact in the
/// canonical encoding.
struct Milliunits {
  std::int64_t value = 0;

  static Milliunits from_units(double units);
  double units() const noexcept { return static_cast<double>(value) / 1000.0; }

  friend auto operator<=>(const Milliunits&, const Milliunits&) = default;
};

struct DoseEntry {
  TimeOfDay time;
  Milliunits dose;
  Milliunits rate_per_hour;

  friend bool operator==(const DoseEntry&, const DoseEntry&) = default;
};

struct PrescriptionCommand {
  std::string command_id;
  std::string patient_id;
  std::string issuer;
  std::vector<DoseEntry> schedule;
  std::int64_t issued_at = 0;

  friend bool operator==(const PrescriptionCommand&, const PrescriptionCommand&) = default;
};

/// Per-entry ceilings enforced before a schedule may reach the pump.
struct SafetyLimits {
  Milliunits max_dose{25'000};
  Milliunits max_rate{30'000};

  /// Structural checks only (positive dose and rate).
  static SafetyLimits unbounded() noexcept;
};

using Record = std::variant<HealthRecord, PrescriptionCommand>;

/// Throw Error{invalid_record} when an invariant does not hold.
void validate(const HealthRecord& record);
void validate(const PrescriptionCommand& command, const SafetyLimits& limits = {});

Bytes canonical_serialize(const HealthRecord& record);
Bytes canonical_serialize(const PrescriptionCommand& command, const SafetyLimits& limits = {});
Bytes canonical_serialize(const Record& record);

/// Inverse of canonical_serialize. Commands are checked structurally, not
/// against SafetyLimits; that is the receiver's call. Throws
/// Error{malformed_blob} on anything that is not a canonical encoding.
Record parse_canonical(std::span<const std::uint8_t> payload);

/// payload || digest(payload), in that order on the wire.
struct SignedBlob {
  Bytes payload;
  sha256::Digest digest{};

  static constexpr std::size_t kMinWireBytes = sha256::kDigestBytes + 1;

  Bytes bytes() const;

  /// Splits wire bytes; the trailing 32 bytes are the digest. Throws
  /// Error{malformed_blob} when shorter than kMinWireBytes.
  static SignedBlob from_bytes(std::span<const std::uint8_t> wire);

  friend bool operator==(const SignedBlob&, const SignedBlob&) = default;
};

SignedBlob sign(const HealthRecord& record);
SignedBlob sign(const PrescriptionCommand& command, const SafetyLimits& limits = {});
SignedBlob sign(const Record& record);

struct TamperDetected {
  sha256::Digest carried{};
  sha256::Digest computed{};
};

using Verified = std::variant<HealthRecord, PrescriptionCommand, TamperDetected>;

/// Recomputes the digest over the payload. Mismatch yields TamperDetected and
/// the payload is never parsed; a match with an unparseable payload throws
/// Error{malformed_blob}.
Verified verify(const SignedBlob& blob);
Verified verify(std::span<const std::uint8_t> wire);

inline bool is_tampered(const Verified& v) noexcept { return std::holds_alternative<TamperDetected>(v); }

/// Storage/addressing key for a health record: (patient_id, timestamp).
struct RecordKey {
  std::string patient_id;
  std::int64_t timestamp = 0;

  std::string to_string() const;

  friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

inline RecordKey key_of(const HealthRecord& r) { return {r.patient_id, r.timestamp}; }

}  // namespace medguard
