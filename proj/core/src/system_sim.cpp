#include "medguard/system_sim.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "medguard/error.hpp"

namespace medguard::sim {
namespace {

std::string short_hex(std::span<const std::uint8_t> bytes) {
  return sha256::to_hex(bytes.first(std::min<std::size_t>(bytes.size(), 8)));
}

std::string units_text(Milliunits m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", m.units());
  return buf;
}

}  // namespace

std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::pump: return "pump";
    case Component::microcontroller: return "microcontroller";
    case Component::cloud: return "cloud";
    case Component::power: return "power";
    case Component::link: return "link";
  }
  return "pump";
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::normal: return "normal";
    case Status::sw_failed: return "sw_failed";
    case Status::hw_failed: return "hw_failed";
    case Status::recovering: return "recovering";
  }
  return "normal";
}

std::array<ComponentState, 5> component_states(int model_state) {
  std::array<ComponentState, 5> s{{{Component::pump, Status::normal},
                                   {Component::microcontroller, Status::normal},
                                   {Component::cloud, Status::normal},
                                   {Component::power, Status::normal},
                                   {Component::link, Status::normal}}};
  auto set = [&](Component c, Status st) { s[static_cast<std::size_t>(c)].status = st; };
  switch (model_state) {
    case 1: break;
    case 2: set(Component::pump, Status::hw_failed); break;        // pump hardware defect
    case 3: set(Component::cloud, Status::sw_failed); break;       // cloud unreachable
    case 4: set(Component::link, Status::sw_failed); break;        // pump<->controller delivery
    case 5:                                                        // power supply
      set(Component::power, Status::hw_failed);
      set(Component::microcontroller, Status::hw_failed);
      break;
    case 6: set(Component::cloud, Status::sw_failed); break;
    case 7: set(Component::cloud, Status::hw_failed); break;
    case 8: set(Component::pump, Status::sw_failed); break;
    case 9: set(Component::pump, Status::hw_failed); break;
    case 10: set(Component::cloud, Status::hw_failed); break;
    case 11: set(Component::pump, Status::hw_failed); break;
    case 12:
      for (auto& c : s) c.status = Status::hw_failed;
      break;
    default: throw Error(Errc::invalid_argument, "model state " + std::to_string(model_state) + " outside 1..12");
  }
  return s;
}

void CloudStore::commit(const RecordKey& key, const Bytes& blob) {
  records[key] = blob;
  replica[key] = blob;
}

std::string Event::to_line() const {
  std::string line = "t=" + std::to_string(time) + " seq=" + std::to_string(seq) + " component=" + component +
                     " event=" + kind;
  if (!detail.empty()) line += " " + detail;
  return line;
}

void EventLog::append(std::uint64_t time, std::string component, std::string kind, std::string detail) {
  if (!entries_.empty() && time < entries_.back().time) {
    throw Error(Errc::invalid_argument, "event log is append-only in time order");
  }
  entries_.push_back({time, entries_.size(), std::move(component), std::move(kind), std::move(detail)});
}

std::size_t EventLog::count(std::string_view kind) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const Event& e) { return e.kind == kind; }));
}

std::string EventLog::to_text() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.to_line();
    out += '\n';
  }
  return out;
}

std::string_view to_string(StoreStatus s) noexcept {
  switch (s) {
    case StoreStatus::committed: return "committed";
    case StoreStatus::queued_channel_down: return "queued";
    case StoreStatus::rejected_tampered: return "rejected";
  }
  return "committed";
}

std::string_view to_string(CommandStatus s) noexcept {
  switch (s) {
    case CommandStatus::applied: return "applied";
    case CommandStatus::discarded_tampered: return "discarded";
    case CommandStatus::rejected_limits: return "rejected";
    case CommandStatus::parked: return "parked";
  }
  return "applied";
}

std::optional<Hop> parse_hop(std::string_view text) noexcept {
  for (auto h : {Hop::upload, Hop::download, Hop::command_uplink, Hop::command_downlink}) {
    if (to_string(h) == text) return h;
  }
  return std::nullopt;
}

std::string_view to_string(Hop h) noexcept {
  switch (h) {
    case Hop::upload: return "upload";
    case Hop::download: return "download";
    case Hop::command_uplink: return "command-uplink";
    case Hop::command_downlink: return "command-downlink";
  }
  return "upload";
}

// ---- simulator -----------------------------------------------------------------

Simulator::Simulator(std::uint64_t seed, SimConfig config)
    : config_(std::move(config)), seed_(seed), random_(seed, "medguard/sim") {
  log("system", "init", "seed=" + std::to_string(seed) + " state=" + std::to_string(state_));
  register_principal(std::string(kControllerId), Role::microcontroller);
  register_principal(std::string(kCloudId), Role::cloud);
  link_to_cloud(std::string(kControllerId));
}

const Principal& Simulator::register_principal(const std::string& id, Role role, std::set<std::string> linked_patients,
                                               bool research_consent) {
  DeterministicRandom key_source(seed_, "medguard/key/" + id);
  Principal p = Principal::create(id, role, generate_keypair(key_source.bytes<32>()), std::move(linked_patients),
                                  research_consent);
  directory_.register_principal(p);
  std::string detail = "id=" + id + " role=" + std::string(to_string(role)) + " privileges=" + p.privileges.to_string();
  auto [it, _] = principals_.emplace(id, std::move(p));
  log("system", "register", std::move(detail));
  return it->second;
}

const Principal& Simulator::principal(std::string_view id) const {
  auto it = principals_.find(id);
  if (it == principals_.end()) throw Error(Errc::auth_failure, "unknown principal '" + std::string(id) + "'");
  return it->second;
}

Simulator::Link& Simulator::link_to_cloud(const std::string& client_id) {
  if (auto it = links_.find(client_id); it != links_.end()) return it->second;
  auto [client, server] = handshake(principal(client_id), principal(kCloudId), directory_, nonces_, random_);
  const std::string sid = sha256::to_hex(client.session_id());
  auto [it, _] = links_.emplace(client_id, Link{std::move(client), std::move(server)});
  log("channel", "established", "peer=" + client_id + " session=" + sid);
  return it->second;
}

void Simulator::log(std::string_view component, std::string_view kind, std::string detail) {
  log_.append(now_, std::string(component), std::string(kind), std::move(detail));
}

void Simulator::fail(std::string_view component, Errc code, const std::string& detail) {
  log(component, to_string(code), detail);
  throw Error(code, detail);
}

Status Simulator::status(Component c) const { return component_states(state_)[static_cast<std::size_t>(c)].status; }

bool Simulator::in_safe_hold() const {
  return status(Component::pump) != Status::normal || status(Component::microcontroller) != Status::normal;
}

bool Simulator::uplink_up() const {
  return status(Component::microcontroller) == Status::normal && status(Component::power) == Status::normal &&
         status(Component::link) == Status::normal && status(Component::cloud) == Status::normal;
}

bool Simulator::pump_path_up() const {
  return status(Component::microcontroller) == Status::normal && status(Component::power) == Status::normal &&
         status(Component::link) == Status::normal && status(Component::pump) == Status::normal;
}

bool Simulator::replicas_consistent() const {
  return pending_.empty() && cloud_.records == local_ && cloud_.replica_consistent();
}

void Simulator::advance_to(std::uint64_t time) {
  if (time < now_) throw Error(Errc::invalid_argument, "virtual time cannot go backwards");
  if (!schedule_.entries.empty()) {
    auto entries = schedule_.entries;
    std::stable_sort(entries.begin(), entries.end(), [](const DoseEntry& a, const DoseEntry& b) { return a.time < b.time; });
    for (std::uint64_t day = now_ / TimeOfDay::kSecondsPerDay; day <= time / TimeOfDay::kSecondsPerDay; ++day) {
      for (const auto& e : entries) {
        const std::uint64_t at = day * TimeOfDay::kSecondsPerDay + e.time.seconds;
        if (at <= now_ || at > time) continue;
        now_ = at;
        if (in_safe_hold()) {
          log("microcontroller", "dose_held", "reason=safe_hold state=" + std::to_string(state_) +
                                                  " units=" + units_text(e.dose));
        } else {
          ++doses_delivered_;
          log("pump", "dose", "units=" + units_text(e.dose) + " rate=" + units_text(e.rate_per_hour) +
                                  " version=" + std::to_string(schedule_.version));
        }
      }
    }
  }
  now_ = time;
}

void Simulator::maybe_corrupt(Hop hop, Bytes& wire) {
  if (corrupt_.erase(hop) == 0 || wire.size() <= SessionContext::kHeaderBytes) return;
  const std::size_t body = wire.size() - SessionContext::kHeaderBytes;
  const std::size_t pos = SessionContext::kHeaderBytes + static_cast<std::size_t>(random_.uniform(body));
  const int bit = static_cast<int>(random_.uniform(8));
  wire[pos] ^= static_cast<std::uint8_t>(1u << bit);
  log("attacker", "corrupted", "hop=" + std::string(to_string(hop)) + " byte=" + std::to_string(pos) +
                                   " bit=" + std::to_string(bit));
}

void Simulator::corrupt_next(Hop hop) {
  corrupt_.insert(hop);
  log("attacker", "arm_corruption", "hop=" + std::string(to_string(hop)));
}

void Simulator::tamper_at_rest(const RecordKey& key, std::optional<std::size_t> byte_offset) {
  auto it = cloud_.records.find(key);
  if (it == cloud_.records.end()) fail("attacker", Errc::not_found, "key=" + key.to_string());
  Bytes& blob = it->second;
  const std::size_t pos = byte_offset.value_or(static_cast<std::size_t>(random_.uniform(blob.size())));
  if (pos >= blob.size()) throw Error(Errc::invalid_argument, "tamper offset beyond blob");
  blob[pos] ^= 0x01;
  log("attacker", "tampered_at_rest", "key=" + key.to_string() + " byte=" + std::to_string(pos));
}

// ---- store ---------------------------------------------------------------------

Simulator::UploadResult Simulator::try_upload(const RecordKey& key) {
  if (!uplink_up()) return UploadResult::down;
  Link& link = link_to_cloud(std::string(kControllerId));
  Bytes wire = link.client.seal(local_.at(key));
  maybe_corrupt(Hop::upload, wire);
  const Bytes received = link.server.unseal(wire);

  bool ok = false;
  try {
    ok = !is_tampered(verify(received));
  } catch (const Error&) {
    ok = false;
  }
  if (!ok) {
    log("cloud", "TamperDetected", "key=" + key.to_string() + " action=rejected");
    return UploadResult::rejected;
  }
  cloud_.commit(key, received);
  pending_.erase(std::remove(pending_.begin(), pending_.end(), key), pending_.end());
  log("cloud", "commit", "key=" + key.to_string() + " replica=written");
  return UploadResult::committed;
}

StoreReceipt Simulator::store_flow(const HealthRecord& record) {
  if (status(Component::microcontroller) != Status::normal || status(Component::power) != Status::normal) {
    fail("microcontroller", Errc::controller_down, "store refused in state " + std::to_string(state_));
  }
  SignedBlob blob;
  try {
    blob = sign(record);
  } catch (const Error& e) {
    fail("microcontroller", e.code(), e.what());
  }
  const RecordKey key = key_of(record);
  local_[key] = blob.bytes();
  log("microcontroller", "local_write", "key=" + key.to_string() + " digest=" + short_hex(blob.digest));
  if (std::find(pending_.begin(), pending_.end(), key) == pending_.end()) pending_.push_back(key);

  switch (try_upload(key)) {
    case UploadResult::committed: return {key, StoreStatus::committed};
    case UploadResult::rejected: return {key, StoreStatus::rejected_tampered};
    case UploadResult::down: break;
  }
  log("microcontroller", "ChannelDown", "key=" + key.to_string() + " action=queued pending=" + std::to_string(pending_.size()));
  return {key, StoreStatus::queued_channel_down};
}

void Simulator::sync() {
  log("microcontroller", "sync", "pending=" + std::to_string(pending_.size()));
  const std::vector<RecordKey> keys(pending_.begin(), pending_.end());
  for (const auto& key : keys) {
    if (try_upload(key) == UploadResult::down) break;
  }
}

// ---- monitor -------------------------------------------------------------------

HealthRecord Simulator::monitor_flow(std::string_view requester, const RecordKey& key) {
  if (!principals_.contains(requester)) fail(requester, Errc::auth_failure, "unknown requester");
  const Principal& who = principal(requester);
  if (authorize(who, Privilege::read_records, key.patient_id) == Decision::deny) {
    fail(requester, Errc::denied, "action=read_records patient=" + key.patient_id);
  }
  if (status(Component::cloud) != Status::normal) fail(requester, Errc::channel_down, "cloud unavailable");
  auto it = cloud_.records.find(key);
  if (it == cloud_.records.end()) fail(requester, Errc::not_found, "key=" + key.to_string());

  Link& link = link_to_cloud(who.id);
  Bytes wire = link.server.seal(it->second);
  maybe_corrupt(Hop::download, wire);
  const Bytes received = link.client.unseal(wire);

  Verified v;
  try {
    v = verify(received);
  } catch (const Error& e) {
    fail(requester, e.code(), "key=" + key.to_string());
  }
  if (is_tampered(v)) fail(requester, Errc::tamper_detected, "key=" + key.to_string() + " action=discarded");
  auto* record = std::get_if<HealthRecord>(&v);
  if (record == nullptr) fail(requester, Errc::malformed_blob, "key=" + key.to_string() + " is not a health record");
  log(requester, "record_valid", "key=" + key.to_string());
  return std::move(*record);
}

// ---- command -------------------------------------------------------------------

CommandReceipt Simulator::command_flow(const PrescriptionCommand& command, std::string_view issuer) {
  if (!principals_.contains(issuer)) fail(issuer, Errc::auth_failure, "unknown issuer");
  const Principal& who = principal(issuer);
  if (command.issuer != who.id) fail(issuer, Errc::auth_failure, "command names issuer '" + command.issuer + "'");
  if (authorize(who, Privilege::issue_command, command.patient_id) == Decision::deny) {
    fail(issuer, Errc::denied, "action=issue_command patient=" + command.patient_id);
  }
  if (status(Component::cloud) != Status::normal) fail(issuer, Errc::channel_down, "cloud unavailable");

  SignedBlob blob;
  try {
    blob = sign(command, SafetyLimits::unbounded());
  } catch (const Error& e) {
    fail(issuer, e.code(), e.what());
  }
  Link& link = link_to_cloud(who.id);
  Bytes wire = link.client.seal(blob.bytes());
  maybe_corrupt(Hop::command_uplink, wire);
  Bytes received = link.server.unseal(wire);
  log("cloud", "command_received", "command=" + command.command_id + " digest=" + short_hex(blob.digest));

  bool ok = false;
  try {
    ok = !is_tampered(verify(received));
  } catch (const Error&) {
    ok = false;
  }
  if (!ok) {
    log("cloud", "TamperDetected", "command=" + command.command_id + " action=discarded");
    return {CommandStatus::discarded_tampered, schedule_.version};
  }
  if (!uplink_up()) {
    parked_.emplace_back(command.command_id, std::move(received));
    log("cloud", "command_parked", "command=" + command.command_id + " reason=ChannelDown");
    return {CommandStatus::parked, schedule_.version};
  }
  return deliver_to_controller(received, command.command_id);
}

CommandReceipt Simulator::deliver_to_controller(const Bytes& blob, const std::string& command_id) {
  Link& link = link_to_cloud(std::string(kControllerId));
  Bytes wire = link.server.seal(blob);
  maybe_corrupt(Hop::command_downlink, wire);
  const Bytes received = link.client.unseal(wire);

  Verified v;
  try {
    v = verify(received);
  } catch (const Error&) {
    v = TamperDetected{};
  }
  auto* cmd = std::get_if<PrescriptionCommand>(&v);
  if (cmd == nullptr) {
    log("microcontroller", "TamperDetected", "command=" + command_id + " action=discarded version=" +
                                                 std::to_string(schedule_.version));
    return {CommandStatus::discarded_tampered, schedule_.version};
  }
  try {
    validate(*cmd, config_.limits);
  } catch (const Error& e) {
    log("microcontroller", "LimitExceeded", "command=" + command_id + " action=rejected");
    return {CommandStatus::rejected_limits, schedule_.version};
  }
  if (!pump_path_up()) {
    parked_.emplace_back(command_id, received);
    log("microcontroller", "PumpFaulted", "command=" + command_id + " action=parked");
    return {CommandStatus::parked, schedule_.version};
  }

  const SignedBlob signed_blob = SignedBlob::from_bytes(received);
  const int frame_bits = 1 + config_.serial_data_bits + (config_.serial_parity ? 1 : 0) + config_.serial_stop_bits;
  const double micros = static_cast<double>(signed_blob.payload.size()) * frame_bits / config_.serial_bits_per_second * 1e6;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.3f", micros);
  log("microcontroller", "serial_transfer", "bytes=" + std::to_string(signed_blob.payload.size()) +
                                                " frame_bits=" + std::to_string(frame_bits) + " micros=" + timing);

  schedule_.entries = cmd->schedule;
  schedule_.version += 1;
  schedule_.source_command_id = command_id;
  log("pump", "schedule_applied", "command=" + command_id + " version=" + std::to_string(schedule_.version) +
                                      " entries=" + std::to_string(schedule_.entries.size()));
  return {CommandStatus::applied, schedule_.version};
}

void Simulator::drain_parked() {
  while (!parked_.empty() && uplink_up()) {
    auto [id, blob] = std::move(parked_.front());
    parked_.pop_front();
    log("cloud", "command_redeliver", "command=" + id);
    if (deliver_to_controller(blob, id).status == CommandStatus::parked) break;
  }
}

// ---- faults --------------------------------------------------------------------

void Simulator::transition(int to, std::string_view cause) {
  const int from = state_;
  const bool held_before = in_safe_hold();
  const auto before = component_states(from);
  const auto after = component_states(to);
  state_ = to;
  exercised_.insert({from, to});
  log("system", "transition", "from=" + std::to_string(from) + " to=" + std::to_string(to) + " cause=" + std::string(cause));
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].status != after[i].status) {
      log(to_string(after[i].component), "status",
          std::string(to_string(before[i].status)) + "->" + std::string(to_string(after[i].status)));
    }
  }
  if (!held_before && in_safe_hold()) log("microcontroller", "safe_hold_enter", "state=" + std::to_string(to));
  if (held_before && !in_safe_hold()) log("microcontroller", "safe_hold_exit", "state=" + std::to_string(to));
}

void Simulator::inject_fault(int state) {
  if (reliability::edge_kind(state_, state) != reliability::RateKind::failure) {
    fail("system", Errc::illegal_transition,
         "no failure edge " + std::to_string(state_) + "->" + std::to_string(state));
  }
  transition(state, "fault");
}

void Simulator::recover() {
  std::optional<int> target;
  for (const auto& e : reliability::recovery_edges()) {
    if (e.from == state_) target = e.to;
  }
  if (!target) fail("system", Errc::illegal_transition, "no recovery edge out of state " + std::to_string(state_));
  transition(*target, "recovery");
  if (uplink_up() && !pending_.empty()) sync();
  if (uplink_up()) drain_parked();
}

// ---- scenarios -----------------------------------------------------------------

namespace {

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    out.emplace_back(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) return out;
    start = end + 1;
  }
}

std::int64_t parse_int(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "bad " + std::string(what) + " '" + text + "'");
  }
}

double parse_double(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "bad " + std::string(what) + " '" + text + "'");
  }
}

bool is_logged_outcome(Errc code) {
  switch (code) {
    case Errc::denied:
    case Errc::tamper_detected:
    case Errc::channel_down:
    case Errc::not_found:
    case Errc::controller_down:
    case Errc::auth_failure:
    case Errc::malformed_blob:
      return true;
    default:
      return false;
  }
}

void execute(Simulator& sim, const std::vector<std::string>& tok, std::uint64_t time) {
  const std::string& actor = tok[1];
  const std::string& action = tok[2];
  auto need = [&](std::size_t n) {
    if (tok.size() < n) throw Error(Errc::invalid_argument, "'" + action + "' needs more arguments");
  };

  if (action == "register") {
    need(4);
    auto role = parse_role(tok[3]);
    if (!role) throw Error(Errc::invalid_argument, "unknown role '" + tok[3] + "'");
    std::set<std::string> patients;
    bool consent = false;
    for (std::size_t i = 4; i < tok.size(); ++i) {
      if (tok[i] == "research_consent") {
        consent = true;
      } else if (tok[i].rfind("patients=", 0) == 0) {
        for (auto& p : split_on(std::string_view(tok[i]).substr(9), ',')) {
          if (!p.empty()) patients.insert(p);
        }
      } else {
        throw Error(Errc::invalid_argument, "unknown register attribute '" + tok[i] + "'");
      }
    }
    sim.register_principal(actor, *role, std::move(patients), consent);
  } else if (action == "store") {
    need(5);
    if (actor != kControllerId) throw Error(Errc::invalid_argument, "only 'mc' stores records");
    HealthRecord r;
    r.patient_id = tok[3];
    r.timestamp = parse_int(tok[4], "record timestamp");
    for (std::size_t i = 5; i < tok.size(); ++i) {
      if (auto eq = tok[i].find('='); eq != std::string::npos) {
        std::string value = tok[i].substr(eq + 1);
        std::replace(value.begin(), value.end(), '_', ' ');
        std::string key = tok[i].substr(0, eq);
        std::replace(key.begin(), key.end(), '_', ' ');
        r.profile[key] = value;
        continue;
      }
      const auto parts = split_on(tok[i], '/');
      if (parts.size() != 3) throw Error(Errc::invalid_argument, "reading must be HH:MM/mg_dl/meal");
      auto meal = parse_meal_tag(parts[2]);
      if (!meal) throw Error(Errc::invalid_argument, "unknown meal tag '" + parts[2] + "'");
      r.glucose_readings.push_back(
          {TimeOfDay::parse(parts[0]), static_cast<std::int32_t>(parse_int(parts[1], "glucose value")), *meal});
    }
    sim.store_flow(r);
  } else if (action == "fetch") {
    need(5);
    sim.monitor_flow(actor, RecordKey{tok[3], parse_int(tok[4], "record timestamp")});
  } else if (action == "command") {
    need(6);
    PrescriptionCommand c;
    c.command_id = tok[3];
    c.patient_id = tok[4];
    c.issuer = actor;
    c.issued_at = static_cast<std::int64_t>(time);
    for (std::size_t i = 5; i < tok.size(); ++i) {
      const auto parts = split_on(tok[i], '/');
      if (parts.size() != 3) throw Error(Errc::invalid_argument, "schedule entry must be HH:MM/dose/rate");
      c.schedule.push_back({TimeOfDay::parse(parts[0]), Milliunits::from_units(parse_double(parts[1], "dose")),
                            Milliunits::from_units(parse_double(parts[2], "rate"))});
    }
    sim.command_flow(c, actor);
  } else if (actor == "system" && action == "fault") {
    need(4);
    sim.inject_fault(static_cast<int>(parse_int(tok[3], "state")));
  } else if (actor == "system" && action == "recover") {
    sim.recover();
  } else if (actor == "system" && action == "sync") {
    sim.sync();
  } else if (actor == "system" && action == "tick") {
    // time already advanced
  } else if (actor == "attacker" && action == "corrupt") {
    need(4);
    auto hop = parse_hop(tok[3]);
    if (!hop) throw Error(Errc::invalid_argument, "unknown hop '" + tok[3] + "'");
    sim.corrupt_next(*hop);
  } else if (actor == "attacker" && action == "tamper") {
    need(5);
    std::optional<std::size_t> offset;
    if (tok.size() > 5) offset = static_cast<std::size_t>(parse_int(tok[5], "byte offset"));
    sim.tamper_at_rest(RecordKey{tok[3], parse_int(tok[4], "record timestamp")}, offset);
  } else {
    throw Error(Errc::invalid_argument, "unknown action '" + actor + " " + action + "'");
  }
}

}  // namespace

void run_scenario(Simulator& sim, std::string_view script) {
  std::istringstream in{std::string(script)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      if (tok.size() < 3) throw Error(Errc::invalid_argument, "expected '<time> <actor> <action> ...'");
      const std::int64_t t = parse_int(tok[0], "time");
      if (t < 0 || static_cast<std::uint64_t>(t) < sim.now()) throw Error(Errc::invalid_argument, "time goes backwards");
      sim.advance_to(static_cast<std::uint64_t>(t));
      execute(sim, tok, static_cast<std::uint64_t>(t));
    } catch (const Error& e) {
      if (is_logged_outcome(e.code())) continue;
      throw Error(Errc::script_error, where + e.what());
    }
  }
}

EventLog run_scenario(std::string_view script, std::uint64_t seed, const SimConfig& config) {
  Simulator sim(seed, config);
  run_scenario(sim, script);
  return sim.log();
}

}  // namespace medguard::sim
