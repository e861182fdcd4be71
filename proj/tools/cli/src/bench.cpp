#include "medguard/cli/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "medguard/error.hpp"

namespace medguard::cli {

void summarize(BenchReport& report) {
  const auto n = static_cast<double>(report.seconds.size());
  if (report.seconds.empty()) {
    report.mean = report.stddev = 0.0;
    return;
  }
  report.mean = std::accumulate(report.seconds.begin(), report.seconds.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : report.seconds) ss += (s - report.mean) * (s - report.mean);
  report.stddev = std::sqrt(ss / n);
}

HealthRecord synthetic_record(std::mt19937_64& rng, std::size_t index, std::size_t min_readings, std::size_t max_readings) {
  std::uniform_int_distribution<std::size_t> count_dist(min_readings, max_readings);
  std::uniform_int_distribution<std::int32_t> fasting(70, 160);
  std::uniform_int_distribution<std::int32_t> post_meal(110, 260);

  HealthRecord r;
  r.patient_id = "patient-" + std::to_string(index + 1);
  r.timestamp = 1'546'300'800 + static_cast<std::int64_t>(index) * 86'400;

  const std::size_t n = count_dist(rng);
  const auto spacing = static_cast<std::uint32_t>((TimeOfDay::kSecondsPerDay - 1800) / std::max<std::size_t>(n, 1));
  std::uniform_int_distribution<std::uint32_t> jitter(0, spacing - 1);
  std::map<MealTag, std::pair<std::int64_t, int>> sums;
  for (std::size_t i = 0; i < n; ++i) {
    const auto slot = static_cast<std::uint32_t>(i) * spacing;
    const std::uint32_t tod = slot + jitter(rng);
    const std::uint32_t hour = tod / 3600;
    MealTag meal = MealTag::other;
    if (hour >= 6 && hour < 8) meal = MealTag::ac_breakfast;
    else if (hour >= 8 && hour < 11) meal = MealTag::pc_breakfast;
    else if (hour >= 17 && hour < 19) meal = MealTag::ac_dinner;
    else if (hour >= 19 && hour < 22) meal = MealTag::pc_dinner;
    const bool after_meal = meal == MealTag::pc_breakfast || meal == MealTag::pc_dinner;
    const std::int32_t mg = after_meal ? post_meal(rng) : fasting(rng);
    r.glucose_readings.push_back({TimeOfDay{tod}, mg, meal});
    sums[meal].first += mg;
    sums[meal].second += 1;
  }

  static constexpr std::pair<MealTag, const char*> kLabels[] = {
      {MealTag::ac_breakfast, "AC breakfast Mean"},
      {MealTag::pc_breakfast, "PC breakfast Mean"},
      {MealTag::ac_dinner, "AC dinner Mean"},
      {MealTag::pc_dinner, "PC dinner Mean"},
  };
  for (const auto& [tag, label] : kLabels) {
    auto it = sums.find(tag);
    if (it != sums.end() && it->second.second > 0) r.profile[label] = std::to_string(it->second.first / it->second.second);
  }
  r.profile["name"] = "Synthetic Patient " + std::to_string(index + 1);
  r.profile["age"] = std::to_string(std::uniform_int_distribution<int>(18, 85)(rng));
  r.profile["diagnosis"] = "type 1 diabetes";
  return r;
}

std::vector<HealthRecord> synthetic_records(const BenchOptions& options) {
  if (options.samples == 0) throw Error(Errc::invalid_argument, "sample count must be at least 1");
  if (options.min_readings > options.max_readings) throw Error(Errc::invalid_argument, "min readings above max readings");
  std::mt19937_64 rng(options.seed);
  std::vector<HealthRecord> out;
  out.reserve(options.samples);
  for (std::size_t i = 0; i < options.samples; ++i) {
    out.push_back(synthetic_record(rng, i, options.min_readings, options.max_readings));
  }
  return out;
}

BenchReport run_bench(const BenchOptions& options) {
  const auto records = synthetic_records(options);
  BenchReport report;
  report.seconds.reserve(records.size());
  for (const auto& r : records) {
    const auto start = std::chrono::steady_clock::now();
    const SignedBlob blob = sign(r);
    const Verified v = verify(blob.bytes());
    const auto stop = std::chrono::steady_clock::now();
    if (is_tampered(v) || std::get<HealthRecord>(v) != r) throw Error(Errc::tamper_detected, "bench roundtrip failed");
    report.seconds.push_back(std::chrono::duration<double>(stop - start).count());
    report.payload_bytes.push_back(blob.payload.size());
  }
  summarize(report);
  return report;
}

void print_report(const BenchReport& report, const BenchOptions& options, std::ostream& out) {
  char line[160];
  out << "sample  payload_bytes  seconds\n";
  for (std::size_t i = 0; i < report.seconds.size(); ++i) {
    std::snprintf(line, sizeof line, "%6zu  %13zu  %.3e\n", i + 1, report.payload_bytes[i], report.seconds[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "mean %.3e s  stddev %.3e s  (reference mean %.1e s, hardware-dependent)\n",
                report.mean, report.stddev, kReferenceMeanSeconds);
  out << line << '\n';

  for (std::size_t i = 0; i < report.seconds.size(); ++i) {
    std::snprintf(line, sizeof line, "sample=%zu bytes=%zu seconds=%.9e\n", i + 1, report.payload_bytes[i], report.seconds[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "samples=%zu seed=%llu mean=%.9e stddev=%.9e reference_mean_s=%.1e\n",
                report.seconds.size(), static_cast<unsigned long long>(options.seed), report.mean, report.stddev,
                kReferenceMeanSeconds);
  out << line;
}

}  // namespace medguard::cli
