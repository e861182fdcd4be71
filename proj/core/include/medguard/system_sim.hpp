#pragma once

// Virtual-time simulation of the monitoring system: insulin pump,
// microcontroller with local storage, cloud store with replica, and remote
// principals, connected by sealed channels. Faults move the system along the
// edges of the 12-state reliability model; while the pump or controller is
// failed the controller holds dosing and queues traffic.
//
// Single-threaded by contract. Independent Simulator instances share nothing.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medguard/error.hpp"
#include "medguard/record.hpp"
#include "medguard/reliability.hpp"
#include "medguard/secure_channel.hpp"

namespace medguard::sim {

enum class Component { pump, microcontroller, cloud, power, link };
enum class Status { normal, sw_failed, hw_failed, recovering };

inline constexpr std::array<Component, 5> kComponents = {Component::pump, Component::microcontroller, Component::cloud,
                                                         Component::power, Component::link};

std::string_view to_string(Component c) noexcept;
std::string_view to_string(Status s) noexcept;

struct ComponentState {
  Component component;
  Status status;
  friend bool operator==(const ComponentState&, const ComponentState&) = default;
};

/// Component statuses implied by a 1-based model state.
std::array<ComponentState, 5> component_states(int model_state);

struct InsulinSchedule {
  std::vector<DoseEntry> entries;
  std::uint64_t version = 0;
  std::string source_command_id;
};

struct CloudStore {
  std::map<RecordKey, Bytes> records;
  std::map<RecordKey, Bytes> replica;

  void commit(const RecordKey& key, const Bytes& blob);
  bool replica_consistent() const { return records == replica; }
};

struct Event {
  std::uint64_t time = 0;
  std::uint64_t seq = 0;
  std::string component;
  std::string kind;
  std::string detail;

  std::string to_line() const;
  friend bool operator==(const Event&, const Event&) = default;
};

/// Append-only, ordered by (time, seq).
class EventLog {
 public:
  void append(std::uint64_t time, std::string component, std::string kind, std::string detail = {});

  const std::vector<Event>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const Event& back() const { return entries_.back(); }
  std::size_t count(std::string_view kind) const;

  /// Newline-delimited `t=<time> seq=<n> component=<c> event=<kind> <detail>`.
  std::string to_text() const;

  friend bool operator==(const EventLog&, const EventLog&) = default;

 private:
  std::vector<Event> entries_;
};

struct SimConfig {
  SafetyLimits limits;
  double serial_bits_per_second = 6.25e6;
  int serial_data_bits = 8;
  bool serial_parity = false;
  int serial_stop_bits = 1;
};

enum class StoreStatus { committed, queued_channel_down, rejected_tampered };
std::string_view to_string(StoreStatus s) noexcept;

struct StoreReceipt {
  RecordKey key;
  StoreStatus status = StoreStatus::committed;
};

enum class CommandStatus { applied, discarded_tampered, rejected_limits, parked };
std::string_view to_string(CommandStatus s) noexcept;

struct CommandReceipt {
  CommandStatus status = CommandStatus::applied;
  std::uint64_t schedule_version = 0;
};

/// Network hop an in-flight corruption is applied to.
enum class Hop { upload, download, command_uplink, command_downlink };
std::optional<Hop> parse_hop(std::string_view text) noexcept;
std::string_view to_string(Hop h) noexcept;

inline constexpr std::string_view kControllerId = "mc";
inline constexpr std::string_view kCloudId = "cloud";

class Simulator {
 public:
  explicit Simulator(std::uint64_t seed, SimConfig config = {});

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Creates a principal with a seed-derived keypair and registers it.
  const Principal& register_principal(const std::string& id, Role role, std::set<std::string> linked_patients = {},
                                      bool research_consent = false);
  const Principal& principal(std::string_view id) const;

  /// Moves virtual time forward, emitting (or holding) scheduled doses.
  void advance_to(std::uint64_t time);
  std::uint64_t now() const noexcept { return now_; }

  /// Store flow: sign, write locally, seal and upload; the cloud verifies
  /// before committing to the store and its replica. A down channel queues
  /// the upload; a corrupted upload is rejected and stays queued. Throws
  /// Error{controller_down} when the controller is failed and
  /// Error{invalid_record} for an invalid record.
  StoreReceipt store_flow(const HealthRecord& record);

  /// Monitor flow: authorization, sealed fetch from the cloud, verification
  /// at the requester. Throws Error{denied|not_found|channel_down|
  /// tamper_detected|auth_failure}; each outcome is logged first.
  HealthRecord monitor_flow(std::string_view requester, const RecordKey& key);

  /// Command flow: issuer -> cloud -> controller -> pump. The controller
  /// re-verifies the digest and checks SafetyLimits before the pump sees it.
  /// Throws Error{denied} (or auth_failure for an unknown issuer) and
  /// Error{channel_down} when the cloud is unreachable from the issuer.
  CommandReceipt command_flow(const PrescriptionCommand& command, std::string_view issuer);

  /// Follows a failure edge from the current model state. Throws
  /// Error{illegal_transition} if (current, state) is not a failure edge.
  void inject_fault(int state);
  /// Follows the recovery edge out of the current state, then drains queued
  /// uploads and parked commands where the path is back up.
  void recover();
  /// Retries queued uploads once each.
  void sync();

  /// Flips one seed-chosen ciphertext bit of the next message on `hop`.
  void corrupt_next(Hop hop);
  /// Flips one bit of the stored cloud copy (seed-chosen byte unless given).
  void tamper_at_rest(const RecordKey& key, std::optional<std::size_t> byte_offset = std::nullopt);

  int model_state() const noexcept { return state_; }
  Status status(Component c) const;
  bool in_safe_hold() const;
  bool uplink_up() const;
  bool pump_path_up() const;

  const InsulinSchedule& schedule() const noexcept { return schedule_; }
  const CloudStore& cloud() const noexcept { return cloud_; }
  const std::map<RecordKey, Bytes>& local_store() const noexcept { return local_; }
  std::size_t pending_uploads() const noexcept { return pending_.size(); }
  std::size_t parked_commands() const noexcept { return parked_.size(); }
  std::uint64_t doses_delivered() const noexcept { return doses_delivered_; }
  const std::set<reliability::Edge>& exercised_edges() const noexcept { return exercised_; }

  /// Local store, cloud store and replica agree on every key and nothing is
  /// queued.
  bool replicas_consistent() const;

  const EventLog& log() const noexcept { return log_; }

 private:
  struct Link {
    SessionContext client;
    SessionContext server;
  };

  Link& link_to_cloud(const std::string& client_id);
  void transition(int to, std::string_view cause);
  enum class UploadResult { committed, rejected, down };
  UploadResult try_upload(const RecordKey& key);
  CommandReceipt deliver_to_controller(const Bytes& blob, const std::string& command_id);
  void drain_parked();
  void maybe_corrupt(Hop hop, Bytes& wire);
  void log(std::string_view component, std::string_view kind, std::string detail = {});
  [[noreturn]] void fail(std::string_view component, Errc code, const std::string& detail);

  SimConfig config_;
  std::uint64_t seed_;
  DeterministicRandom random_;
  KeyDirectory directory_;
  NonceCache nonces_;
  std::map<std::string, Principal, std::less<>> principals_;
  std::map<std::string, Link, std::less<>> links_;

  std::uint64_t now_ = 0;
  int state_ = reliability::kNormalState;
  std::set<reliability::Edge> exercised_;

  std::map<RecordKey, Bytes> local_;
  CloudStore cloud_;
  std::deque<RecordKey> pending_;
  std::deque<std::pair<std::string, Bytes>> parked_;  // (command id, signed blob)
  std::set<Hop> corrupt_;

  InsulinSchedule schedule_;
  std::uint64_t doses_delivered_ = 0;

  EventLog log_;
};

/// Runs a line-oriented script against a fresh Simulator:
///
///   <time> <actor> <action> <args...>      '#' comments, blank lines ignored
///
///   <t> <id> register <role> [patients=a,b] [research_consent]
///   <t> mc store <patient> <record-ts> <HH:MM/mg_dl/meal>... [key=value]...
///   <t> <id> fetch <patient> <record-ts>
///   <t> <id> command <command-id> <patient> <HH:MM/dose/rate>...
///   <t> system fault <state> | recover | sync | tick
///   <t> attacker corrupt <upload|download|command-uplink|command-downlink>
///   <t> attacker tamper <patient> <record-ts> [byte-offset]
///
/// Times are non-decreasing virtual seconds. Flow failures (deny, tamper,
/// channel down) are logged outcomes; syntax errors and illegal transitions
/// throw Error{script_error} naming the line.
EventLog run_scenario(std::string_view script, std::uint64_t seed, const SimConfig& config = {});

/// Same, but leaves the simulator for inspection.
void run_scenario(Simulator& sim, std::string_view script);

}  // namespace medguard::sim
