#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "medguard/record.hpp"

namespace medguard::cli {

/// Mean time per sample from the published speed experiment; printed for
/// comparison only, timings are hardware-dependent.
inline constexpr double kReferenceMeanSeconds = 5.8e-4;

struct BenchOptions {
  std::size_t samples = 70;
  std::uint64_t seed = 1;
  std::size_t min_readings = 4;
  std::size_t max_readings = 96;
};

struct BenchReport {
  std::vector<double> seconds;            // sign + verify time per sample
  std::vector<std::size_t> payload_bytes;
  double mean = 0.0;
  double stddev = 0.0;                    // population standard deviation
};

/// Recomputes mean and stddev from report.seconds.
void summarize(BenchReport& report);

/// One synthetic day of glucose readings with meal-tagged means in the profile.
HealthRecord synthetic_record(std::mt19937_64& rng, std::size_t index, std::size_t min_readings, std::size_t max_readings);

/// Deterministic given options.seed, timings excepted.
std::vector<HealthRecord> synthetic_records(const BenchOptions& options);

BenchReport run_bench(const BenchOptions& options);

/// Text table, then `sample=<i> bytes=<n> seconds=<s>` rows and a summary row.
void print_report(const BenchReport& report, const BenchOptions& options, std::ostream& out);

}  // namespace medguard::cli
