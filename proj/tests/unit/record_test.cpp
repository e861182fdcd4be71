#include "medguard/record.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace {

using namespace medguard;
using medguard::testing::error_code_of;
using medguard::testing::random_record;
using medguard::testing::sample_command;
using medguard::testing::sample_record;

TEST(TimeOfDay, ParsesAndPrints) {
  EXPECT_EQ(TimeOfDay::parse("07:05").seconds, 7u * 3600 + 5 * 60);
  EXPECT_EQ(TimeOfDay::parse("23:59:59").seconds, 86399u);
  EXPECT_EQ(TimeOfDay::parse("07:05").to_string(), "07:05:00");
  EXPECT_THROW(TimeOfDay::parse("24:00"), Error);
  EXPECT_THROW(TimeOfDay::parse("7"), Error);
}

TEST(Canonical, RoundTripsHealthRecords) {
  const HealthRecord r = sample_record();
  const Bytes bytes = canonical_serialize(r);
  EXPECT_EQ(std::get<HealthRecord>(parse_canonical(bytes)), r);
}

TEST(Canonical, RoundTripsCommands) {
  const PrescriptionCommand c = sample_command();
  EXPECT_EQ(std::get<PrescriptionCommand>(parse_canonical(canonical_serialize(c))), c);
}

TEST(Canonical, ProfileInsertionOrderDoesNotMatter) {
  HealthRecord a = sample_record();
  HealthRecord b = a;
  a.profile.clear();
  b.profile.clear();
  a.profile.emplace("zeta", "1");
  a.profile.emplace("alpha", "2");
  b.profile.emplace("alpha", "2");
  b.profile.emplace("zeta", "1");
  EXPECT_EQ(canonical_serialize(a), canonical_serialize(b));
}

TEST(Canonical, RejectsTrailingBytesAndTruncation) {
  Bytes bytes = canonical_serialize(sample_record());
  Bytes longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(error_code_of([&] { parse_canonical(longer); }), Errc::malformed_blob);
  bytes.pop_back();
  EXPECT_EQ(error_code_of([&] { parse_canonical(bytes); }), Errc::malformed_blob);
  EXPECT_EQ(error_code_of([&] { parse_canonical(Bytes{}); }), Errc::malformed_blob);
}

TEST(Validate, GlucoseOutOfRangeIsInvalid) {
  HealthRecord r = sample_record();
  r.glucose_readings[0].mg_dl = 1001;
  EXPECT_EQ(error_code_of([&] { validate(r); }), Errc::invalid_record);
  EXPECT_EQ(error_code_of([&] { sign(r); }), Errc::invalid_record);
  r.glucose_readings[0].mg_dl = 1000;
  EXPECT_NO_THROW(validate(r));
  r.glucose_readings[0].mg_dl = -1;
  EXPECT_EQ(error_code_of([&] { validate(r); }), Errc::invalid_record);
}

TEST(Validate, ReadingTimesMustNotDecrease) {
  HealthRecord r = sample_record();
  std::swap(r.glucose_readings[0], r.glucose_readings[3]);
  EXPECT_EQ(error_code_of([&] { validate(r); }), Errc::invalid_record);
}

TEST(Validate, RejectsEmptyIdsAndBadUtf8) {
  HealthRecord r = sample_record();
  r.patient_id.clear();
  EXPECT_EQ(error_code_of([&] { validate(r); }), Errc::invalid_record);
  r = sample_record();
  r.profile["note"] = std::string("\xc3", 1);
  EXPECT_EQ(error_code_of([&] { validate(r); }), Errc::invalid_record);
  r.profile["note"] = "caf\xc3\xa9";
  EXPECT_NO_THROW(validate(r));
}

TEST(Validate, CommandLimits) {
  EXPECT_NO_THROW(validate(sample_command()));
  EXPECT_EQ(error_code_of([&] { validate(sample_command("c", 25'001)); }), Errc::invalid_record);
  EXPECT_EQ(error_code_of([&] { validate(sample_command("c", 0)); }), Errc::invalid_record);
  PrescriptionCommand empty = sample_command();
  empty.schedule.clear();
  EXPECT_EQ(error_code_of([&] { validate(empty); }), Errc::invalid_record);
  EXPECT_NO_THROW(validate(sample_command("c", 90'000), SafetyLimits::unbounded()));
}

TEST(SignedBlob, DigestIsAppendedAfterPayload) {
  const SignedBlob blob = sign(sample_record());
  const Bytes wire = blob.bytes();
  ASSERT_EQ(wire.size(), blob.payload.size() + 32);
  EXPECT_TRUE(std::equal(blob.payload.begin(), blob.payload.end(), wire.begin()));
  EXPECT_EQ(sha256::digest(blob.payload), blob.digest);
  EXPECT_TRUE(std::equal(blob.digest.begin(), blob.digest.end(), wire.end() - 32));
  EXPECT_EQ(SignedBlob::from_bytes(wire), blob);
}

TEST(SignedBlob, VerifyReturnsTheRecord) {
  const HealthRecord r = sample_record();
  const Verified v = verify(sign(r));
  ASSERT_TRUE(std::holds_alternative<HealthRecord>(v));
  EXPECT_EQ(std::get<HealthRecord>(v), r);
}

TEST(SignedBlob, OneFieldChangeChangesTheDigest) {
  EXPECT_NE(sign(sample_record(142)).digest, sign(sample_record(144)).digest);
}

TEST(SignedBlob, PayloadSwappedUnderOldDigestIsTampered) {
  SignedBlob blob = sign(sample_record(142));
  blob.payload = canonical_serialize(sample_record(144));
  const Verified v = verify(blob);
  ASSERT_TRUE(is_tampered(v));
  EXPECT_EQ(std::get<TamperDetected>(v).computed, sha256::digest(blob.payload));
  EXPECT_NE(std::get<TamperDetected>(v).carried, std::get<TamperDetected>(v).computed);
}

TEST(SignedBlob, ShortBlobIsMalformed) {
  const Bytes ten(10, 0x41);
  EXPECT_EQ(error_code_of([&] { verify(ten); }), Errc::malformed_blob);
  const Bytes thirty_two(32, 0x41);
  EXPECT_EQ(error_code_of([&] { verify(thirty_two); }), Errc::malformed_blob);
}

TEST(SignedBlob, MatchingDigestOverGarbageIsMalformed) {
  SignedBlob blob;
  blob.payload = {1, 2, 3};
  blob.digest = sha256::digest(blob.payload);
  EXPECT_EQ(error_code_of([&] { verify(blob); }), Errc::malformed_blob);
}

TEST(SignedBlobProperty, EverySingleByteFlipIsDetected) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const Bytes wire = sign(random_record(rng)).bytes();
    Bytes mutated = wire;
    const std::size_t pos = rng() % mutated.size();
    mutated[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    ASSERT_TRUE(is_tampered(verify(mutated))) << "trial " << trial << " offset " << pos;
  }
}

TEST(SignedBlobProperty, RoundTripOnRandomRecords) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const HealthRecord r = random_record(rng);
    const Verified v = verify(sign(r).bytes());
    ASSERT_TRUE(std::holds_alternative<HealthRecord>(v));
    ASSERT_EQ(std::get<HealthRecord>(v), r);
    ASSERT_EQ(canonical_serialize(std::get<HealthRecord>(v)), canonical_serialize(r));
  }
}

TEST(RecordKey, Formats) {
  EXPECT_EQ(key_of(sample_record()).to_string(), "patient-17@1546300800");
}

}  // namespace
