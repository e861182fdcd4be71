#include "medguard/cli/dispatch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <vector>

#include "medguard/cli/bench.hpp"
#include "medguard/cli/record_json.hpp"
#include "medguard/error.hpp"
#include "medguard/record.hpp"
#include "medguard/reliability.hpp"
#include "medguard/sha256.hpp"
#include "medguard/system_sim.hpp"

namespace medguard::cli {
namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0   success\n"
    "  2   integrity failure (TamperDetected)\n"
    "  3   malformed input (bad blob, record, script, rate table, illegal transition)\n"
    "  4   authentication/authorization failure\n"
    "  5   I/O error or missing item\n"
    "  6   numerical failure (StepTooLarge, SingularSystem)\n"
    "  7   component fault (ChannelDown, PumpFaulted, ControllerDown)\n"
    "  64  usage error\n"
    "Environment: MEDGUARD_SEED overrides the default seed of simulate and bench.";

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const std::string& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "short write to " + path);
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MEDGUARD_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(Errc::invalid_argument, "MEDGUARD_SEED is not an unsigned integer");
  }
  return 1;
}

double seconds_per(const std::string& unit) {
  if (unit == "second" || unit == "s") return 1.0;
  if (unit == "minute" || unit == "min") return 60.0;
  if (unit == "hour" || unit == "h") return 3600.0;
  if (unit == "day" || unit == "d") return 86400.0;
  if (unit == "year" || unit == "y") return 365.0 * 86400.0;
  throw Error(Errc::invalid_argument, "unknown time unit '" + unit + "'");
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- subcommands -----------------------------------------------------------------

int cmd_hash(const std::string& path, std::ostream& out) {
  const Bytes data = read_file(path);
  out << sha256::to_hex(sha256::digest(data)) << '\n';
  return kExitOk;
}

int cmd_sign(const std::string& input, const std::string& output, double max_dose, double max_rate, std::ostream& out) {
  const Record record = record_from_json(read_text(input));
  SignedBlob blob;
  if (const auto* c = std::get_if<PrescriptionCommand>(&record)) {
    blob = sign(*c, SafetyLimits{Milliunits::from_units(max_dose), Milliunits::from_units(max_rate)});
  } else {
    blob = sign(record);
  }
  write_file(output, blob.bytes());
  out << "signed " << (std::holds_alternative<HealthRecord>(record) ? "health_record" : "prescription_command")
      << " payload_bytes=" << blob.payload.size() << " digest=" << sha256::to_hex(blob.digest) << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& path, bool print_json, std::ostream& out, std::ostream& err) {
  const Verified v = verify(read_file(path));
  if (const auto* t = std::get_if<TamperDetected>(&v)) {
    err << "TamperDetected: carried=" << sha256::to_hex(t->carried) << " computed=" << sha256::to_hex(t->computed) << '\n';
    return exit_code(Errc::tamper_detected);
  }
  const Record record = std::holds_alternative<HealthRecord>(v) ? Record(std::get<HealthRecord>(v))
                                                                 : Record(std::get<PrescriptionCommand>(v));
  out << "valid " << (std::holds_alternative<HealthRecord>(record) ? "health_record" : "prescription_command") << '\n';
  if (print_json) out << record_to_json(record) << '\n';
  return kExitOk;
}

int cmd_simulate(const std::string& script, std::optional<std::uint64_t> seed, const std::string& log_path,
                 std::ostream& out) {
  const std::uint64_t s = seed.value_or(default_seed());
  const sim::EventLog log = sim::run_scenario(read_text(script), s);
  const std::string text = log.to_text();
  if (log_path.empty()) {
    out << text;
  } else {
    write_file(log_path, Bytes(text.begin(), text.end()));
    out << "events=" << log.size() << " seed=" << s << " log=" << log_path << '\n';
  }
  return kExitOk;
}

struct ReliabilityArgs {
  std::string rates;
  double horizon = 8760.0;
  double step = 0.25;
  std::string time_unit;
  bool steady = false;
  bool compare = false;
  std::size_t every = 0;
};

void print_distribution(std::ostream& out, std::string_view label, const reliability::StateDistribution& d) {
  for (std::size_t i = 0; i < d.p.size(); ++i) {
    out << label << "_state=" << (i + 1) << " p=" << fmt(d.p[i]) << '\n';
  }
  out << label << "_availability=" << fmt(reliability::availability(d)) << '\n';
}

int cmd_reliability(const ReliabilityArgs& a, std::ostream& out, std::ostream& err) {
  using namespace reliability;
  const std::string path = a.rates.empty() ? std::string(MEDGUARD_DEFAULT_RATES) : a.rates;
  const RateTable table = a.rates.empty() ? RateTable::table_one() : RateTable::load(path);
  for (const auto& e : table.defaulted_edges()) {
    const bool failure = edge_kind(e.from, e.to) == RateKind::failure;
    err << "warning: " << (failure ? "lambda" : "mu") << '(' << e.from << ',' << e.to
        << ") not given; defaulted to 0\n";
  }
  const CtmcModel model = build_generator(table);
  const double horizon =
      a.time_unit.empty() ? a.horizon : a.horizon * seconds_per(a.time_unit) / seconds_per(table.time_unit);

  out << "rates=" << (a.rates.empty() ? "builtin" : path) << " rate_unit=" << table.time_unit << '\n';

  TransientOptions opts;
  opts.horizon = horizon;
  opts.step = a.step;
  opts.record_every = a.every;
  const Trajectory traj = solve_transient(model, StateDistribution::unit(kStateCount), opts);
  out << "mode=transient horizon=" << fmt(horizon) << " step=" << fmt(traj.step) << " steps=" << traj.steps
      << " max_conservation_error=" << fmt(traj.max_conservation_error)
      << " min_probability=" << fmt(traj.min_probability)
      << " convergence_delta=" << fmt(traj.convergence_delta.value_or(0.0)) << '\n';
  if (a.every != 0) {
    for (const auto& s : traj.samples) {
      out << "t=" << fmt(s.t);
      for (std::size_t i = 0; i < s.p.size(); ++i) out << " p" << (i + 1) << '=' << fmt(s.p[i]);
      out << '\n';
    }
  }
  print_distribution(out, "transient", traj.final());

  if (a.steady || a.compare) {
    const StateDistribution st = steady_state(model);
    out << "mode=steady residual=" << fmt(balance_residual(model, st.p)) << '\n';
    print_distribution(out, "steady", st);
  }

  if (a.compare) {
    const ReferenceComparison cmp = compare_with_reference(model, a.step);
    out << "reference_availability=" << fmt(cmp.target) << " band=" << fmt(cmp.band) << '\n';
    if (cmp.t_star) {
      out << "t_star=" << fmt(*cmp.t_star) << ' ' << table.time_unit << '\n';
    } else {
      out << "t_star=none searched_to=" << fmt(cmp.search_horizon) << '\n';
    }
    const auto& ref = reference_distribution();
    out << "state  reference      at_t_star      steady\n";
    for (std::size_t i = 0; i < ref.size(); ++i) {
      char line[128];
      std::snprintf(line, sizeof line, "%5zu  %-13.7g  %-13.7g  %-13.7g\n", i + 1, ref[i],
                    cmp.at_t_star ? cmp.at_t_star->p[i] : 0.0 / 0.0, cmp.steady.p[i]);
      out << line;
    }
  }
  return kExitOk;
}

}  // namespace

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"medguard: signed health records, device simulation and availability analysis", "medguard"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  std::string hash_path;
  auto* hash = app.add_subcommand("hash", "Print the SHA-256 digest of a file as 64 lowercase hex characters");
  hash->add_option("file", hash_path, "Input file")->required();

  std::string sign_in, sign_out;
  double max_dose = 25.0, max_rate = 30.0;
  auto* sign_cmd = app.add_subcommand("sign", "Serialize a JSON record canonically and append its digest");
  sign_cmd->add_option("record", sign_in, "Record or command as JSON")->required();
  sign_cmd->add_option("-o,--output", sign_out, "Output blob path")->required();
  sign_cmd->add_option("--max-dose", max_dose, "Per-entry dose ceiling for commands (units)")->capture_default_str();
  sign_cmd->add_option("--max-rate", max_rate, "Per-entry rate ceiling for commands (units/hour)")->capture_default_str();

  std::string verify_path;
  bool verify_json = false;
  auto* verify_cmd = app.add_subcommand("verify", "Recompute a blob's digest; exit 0 valid, 2 tampered, 3 malformed");
  verify_cmd->add_option("blob", verify_path, "Signed blob")->required();
  verify_cmd->add_flag("--json", verify_json, "Print the verified record as JSON");

  std::string script, log_path;
  std::optional<std::uint64_t> sim_seed;
  auto* simulate = app.add_subcommand("simulate", "Replay a scenario script and emit the event log");
  simulate->add_option("script", script, "Scenario script")->required();
  simulate->add_option("--seed", sim_seed, "Seed (default: MEDGUARD_SEED or 1)");
  simulate->add_option("--log", log_path, "Write the event log here instead of stdout");

  ReliabilityArgs rel;
  auto* reliability_cmd = app.add_subcommand("reliability", "Solve the 12-state availability model");
  reliability_cmd->add_option("--rates", rel.rates, "Rate table file (default: built-in published table)");
  reliability_cmd->add_option("--horizon", rel.horizon, "Transient horizon")->capture_default_str();
  reliability_cmd->add_option("--step", rel.step, "Integration step in rate units")->capture_default_str();
  reliability_cmd->add_option("--time-unit", rel.time_unit, "Unit of --horizon (second|minute|hour|day|year); default: the rate unit");
  reliability_cmd->add_option("--every", rel.every, "Print every k-th step of the trajectory");
  reliability_cmd->add_flag("--steady", rel.steady, "Also solve the steady state");
  reliability_cmd->add_flag("--compare", rel.compare, "Compare against the published state probabilities");

  BenchOptions bench_opts;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "Time sign+verify over synthetic diabetic records");
  bench->add_option("--samples", bench_opts.samples, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Seed (default: MEDGUARD_SEED or 1)");
  bench->add_option("--min-readings", bench_opts.min_readings, "Fewest glucose readings per record")->capture_default_str();
  bench->add_option("--max-readings", bench_opts.max_readings, "Most glucose readings per record")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (hash->parsed()) return cmd_hash(hash_path, out);
    if (sign_cmd->parsed()) return cmd_sign(sign_in, sign_out, max_dose, max_rate, out);
    if (verify_cmd->parsed()) return cmd_verify(verify_path, verify_json, out, err);
    if (simulate->parsed()) return cmd_simulate(script, sim_seed, log_path, out);
    if (reliability_cmd->parsed()) return cmd_reliability(rel, out, err);
    if (bench->parsed()) {
      bench_opts.seed = bench_seed.value_or(default_seed());
      const BenchReport report = run_bench(bench_opts);
      print_report(report, bench_opts, out);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "medguard: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "medguard: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace medguard::cli
