#include "medguard/secure_channel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "medguard/error.hpp"

namespace medguard {
namespace {

__extension__ using u128 = unsigned __int128;

constexpr std::uint64_t kModulus = (std::uint64_t{1} << 61) - 1;
constexpr std::uint64_t kGenerator = 37;

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b) {
  const u128 product = static_cast<u128>(a) * b;
  // Mersenne reduction: x mod (2^61 - 1) = (x & m) + (x >> 61), folded.
  std::uint64_t r = static_cast<std::uint64_t>(product & kModulus) + static_cast<std::uint64_t>(product >> 61);
  r = (r & kModulus) + (r >> 61);
  return r >= kModulus ? r - kModulus : r;
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t result = 1;
  base %= kModulus;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base);
    base = mul_mod(base, base);
    exp >>= 1;
  }
  return result;
}

Bytes be64(std::uint64_t v) {
  Bytes out(8);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return out;
}

std::uint64_t load_be64(std::span<const std::uint8_t> b) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t group_element(std::span<const std::uint8_t> key, std::string_view what) {
  if (key.size() != 8) throw Error(Errc::invalid_argument, std::string(what) + " must be 8 bytes");
  const std::uint64_t v = load_be64(key);
  if (v == 0 || v >= kModulus) throw Error(Errc::invalid_argument, std::string(what) + " out of range");
  return v;
}

void put_text(sha256::Hasher& h, std::string_view s) {
  h.update(be64(s.size()));
  h.update(s);
}

std::string hex(std::span<const std::uint8_t> b) { return sha256::to_hex(b); }

Bytes from_hex(std::string_view text) {
  if (text.size() % 2 != 0) throw Error(Errc::invalid_argument, "odd-length hex string");
  Bytes out;
  out.reserve(text.size() / 2);
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw Error(Errc::invalid_argument, "bad hex digit");
  };
  for (std::size_t i = 0; i < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>((nibble(text[i]) << 4) | nibble(text[i + 1])));
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(sep, start);
    out.emplace_back(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

struct Transcript {
  sha256::Digest digest;
  SessionKey key;
  SessionId id;
};

Transcript derive(std::uint64_t shared, const ClientHello& ch, const std::string& server_id,
                  std::span<const std::uint8_t> server_public, const Nonce& server_nonce) {
  sha256::Hasher h;
  h.update("medguard/handshake/v1");
  put_text(h, ch.client_id);
  put_text(h, server_id);
  h.update(ch.client_public);
  h.update(server_public);
  h.update(ch.client_nonce);
  h.update(server_nonce);
  Transcript t;
  t.digest = h.finalize();

  t.key = sha256::Hasher().update("medguard/session-key").update(be64(shared)).update(t.digest).finalize();
  const auto sid = sha256::Hasher().update("medguard/session-id").update(t.digest).finalize();
  std::copy_n(sid.begin(), t.id.size(), t.id.begin());
  return t;
}

sha256::Digest confirm(std::string_view label, const SessionKey& key, const sha256::Digest& transcript) {
  return sha256::Hasher().update(label).update(key).update(transcript).finalize();
}

bool same_digest(const sha256::Digest& a, const sha256::Digest& b) {
  std::uint8_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<std::uint8_t>(a[i] ^ b[i]);
  return diff == 0;
}

[[noreturn]] void auth_failure(const std::string& what) { throw Error(Errc::auth_failure, what); }

}  // namespace

// ---- randomness --------------------------------------------------------------

DeterministicRandom::DeterministicRandom(std::uint64_t seed, std::string_view label) : prefix_(be64(seed)) {
  prefix_.insert(prefix_.end(), label.begin(), label.end());
}

void DeterministicRandom::fill(std::span<std::uint8_t> out) {
  for (auto& byte : out) {
    if (used_ == block_.size()) {
      block_ = sha256::Hasher().update(prefix_).update(be64(counter_++)).finalize();
      used_ = 0;
    }
    byte = block_[used_++];
  }
}

std::uint64_t DeterministicRandom::next_u64() {
  const auto b = bytes<8>();
  return load_be64(b);
}

std::uint64_t DeterministicRandom::uniform(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_argument, "uniform bound must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % bound;
}

// ---- keys ----------------------------------------------------------------------

KeyPair generate_keypair(const Seed& seed) {
  const auto d = sha256::Hasher().update("medguard/keypair").update(seed).finalize();
  const std::uint64_t exponent = load_be64(d) % (kModulus - 2) + 1;
  KeyPair kp;
  kp.private_key = be64(exponent);
  kp.public_key = be64(pow_mod(kGenerator, exponent));
  return kp;
}

Bytes public_from_private(std::span<const std::uint8_t> private_key) {
  return be64(pow_mod(kGenerator, group_element(private_key, "private key")));
}

// ---- roles & privileges --------------------------------------------------------

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::patient: return "patient";
    case Role::physician: return "physician";
    case Role::caregiver: return "caregiver";
    case Role::researcher: return "researcher";
    case Role::microcontroller: return "microcontroller";
    case Role::cloud: return "cloud";
  }
  return "patient";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  for (auto r : {Role::patient, Role::physician, Role::caregiver, Role::researcher, Role::microcontroller, Role::cloud}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Privilege p) noexcept {
  switch (p) {
    case Privilege::read_records: return "read_records";
    case Privilege::write_records: return "write_records";
    case Privilege::issue_command: return "issue_command";
    case Privilege::change_schedule: return "change_schedule";
  }
  return "read_records";
}

std::optional<Privilege> parse_privilege(std::string_view text) noexcept {
  for (auto p : {Privilege::read_records, Privilege::write_records, Privilege::issue_command, Privilege::change_schedule}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::string PrivilegeSet::to_string() const {
  std::string out;
  for (auto p : {Privilege::read_records, Privilege::write_records, Privilege::issue_command, Privilege::change_schedule}) {
    if (!contains(p)) continue;
    if (!out.empty()) out += ',';
    out += medguard::to_string(p);
  }
  return out.empty() ? "-" : out;
}

PrivilegeSet PrivilegeSet::parse(std::string_view text) {
  PrivilegeSet set;
  if (text == "-") return set;
  for (const auto& part : split(text, ',')) {
    auto p = parse_privilege(part);
    if (!p) throw Error(Errc::invalid_argument, "unknown privilege '" + part + "'");
    set.insert(*p);
  }
  return set;
}

PrivilegeSet default_privileges(Role role) noexcept {
  switch (role) {
    case Role::patient: return {Privilege::read_records};
    case Role::physician:
      return {Privilege::read_records, Privilege::write_records, Privilege::issue_command, Privilege::change_schedule};
    case Role::caregiver: return {Privilege::issue_command};
    case Role::researcher: return {Privilege::read_records};
    case Role::microcontroller: return {Privilege::read_records, Privilege::write_records};
    case Role::cloud: return {Privilege::read_records, Privilege::write_records};
  }
  return {};
}

Principal Principal::create(std::string id, Role role, KeyPair keys, std::set<std::string> linked_patients,
                            bool research_consent) {
  Principal p;
  p.id = std::move(id);
  p.role = role;
  p.keys = std::move(keys);
  p.privileges = default_privileges(role);
  p.linked_patients = std::move(linked_patients);
  p.research_consent = research_consent;
  p.check_invariants();
  return p;
}

void Principal::check_invariants() const {
  if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(Errc::invalid_argument, "principal id must be a non-empty token");
  }
  const bool may_command = role == Role::physician || role == Role::caregiver;
  if (!may_command && (privileges.contains(Privilege::issue_command) || privileges.contains(Privilege::change_schedule))) {
    throw Error(Errc::invalid_argument, "role " + std::string(to_string(role)) + " may not hold command privileges");
  }
  if (role == Role::researcher && !(privileges == PrivilegeSet{Privilege::read_records} || privileges.empty())) {
    throw Error(Errc::invalid_argument, "researchers hold read_records only");
  }
  if (research_consent && role != Role::researcher) {
    throw Error(Errc::invalid_argument, "research_consent applies to researchers only");
  }
  group_element(keys.public_key, "public key");
}

Principal Principal::public_view() const {
  Principal p = *this;
  p.keys.private_key.clear();
  return p;
}

Decision authorize(const Principal& principal, Privilege action, std::string_view patient_id) noexcept {
  if (!principal.privileges.contains(action)) return Decision::deny;
  if (principal.role == Role::researcher) {
    return action == Privilege::read_records && principal.research_consent ? Decision::allow : Decision::deny;
  }
  return principal.linked_patients.contains(std::string(patient_id)) ? Decision::allow : Decision::deny;
}

// ---- directory -----------------------------------------------------------------

KeyDirectory::KeyDirectory(const KeyDirectory& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
}

KeyDirectory& KeyDirectory::operator=(const KeyDirectory& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  entries_ = other.entries_;
  return *this;
}

void KeyDirectory::register_principal(const Principal& principal) {
  principal.check_invariants();
  std::unique_lock lock(mutex_);
  if (entries_.contains(principal.id)) throw Error(Errc::invalid_argument, "principal '" + principal.id + "' already registered");
  entries_.emplace(principal.id, principal.public_view());
}

std::optional<Principal> KeyDirectory::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t KeyDirectory::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<Principal> KeyDirectory::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<Principal> out;
  for (const auto& [_, p] : entries_) out.push_back(p);
  return out;
}

std::string KeyDirectory::serialize() const {
  std::ostringstream out;
  for (const auto& p : entries()) {
    out << p.id << ' ' << to_string(p.role) << ' ' << hex(p.keys.public_key) << ' ' << p.privileges.to_string();
    if (!p.linked_patients.empty()) {
      out << " patients=";
      bool first = true;
      for (const auto& patient : p.linked_patients) {
        out << (first ? "" : ",") << patient;
        first = false;
      }
    }
    if (p.research_consent) out << " research_consent";
    out << '\n';
  }
  return out.str();
}

KeyDirectory KeyDirectory::parse(std::string_view text) {
  KeyDirectory dir;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id, role, pub, privs, extra;
    if (!(fields >> id >> role >> pub >> privs)) {
      throw Error(Errc::invalid_argument, "directory line " + std::to_string(line_no) + ": expected 4 fields");
    }
    auto r = parse_role(role);
    if (!r) throw Error(Errc::invalid_argument, "directory line " + std::to_string(line_no) + ": unknown role '" + role + "'");
    Principal p;
    p.id = id;
    p.role = *r;
    p.keys.public_key = from_hex(pub);
    p.privileges = PrivilegeSet::parse(privs);
    while (fields >> extra) {
      if (extra == "research_consent") {
        p.research_consent = true;
      } else if (extra.rfind("patients=", 0) == 0) {
        for (auto& patient : split(std::string_view(extra).substr(9), ',')) {
          if (!patient.empty()) p.linked_patients.insert(patient);
        }
      } else {
        throw Error(Errc::invalid_argument, "directory line " + std::to_string(line_no) + ": unknown attribute '" + extra + "'");
      }
    }
    dir.register_principal(p);
  }
  return dir;
}

void KeyDirectory::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out << serialize();
}

KeyDirectory KeyDirectory::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool NonceCache::insert(const Nonce& nonce) {
  std::scoped_lock lock(mutex_);
  return seen_.insert(nonce).second;
}

// ---- session -------------------------------------------------------------------

SessionContext::SessionContext(SessionId id, std::string local_id, std::string peer_id, SessionKey key, ChannelSide side)
    : id_(id), local_id_(std::move(local_id)), peer_id_(std::move(peer_id)), key_(key), side_(side) {}

void SessionContext::apply_keystream(ChannelSide direction, std::uint64_t counter, std::span<std::uint8_t> data) const {
  const std::uint8_t dir = static_cast<std::uint8_t>(direction);
  const Bytes ctr = be64(counter);
  std::uint64_t block_index = 0;
  for (std::size_t offset = 0; offset < data.size(); offset += sha256::kDigestBytes, ++block_index) {
    const auto block = sha256::Hasher()
                           .update(key_)
                           .update(std::span<const std::uint8_t>(&dir, 1))
                           .update(ctr)
                           .update(be64(block_index))
                           .finalize();
    const std::size_t n = std::min(block.size(), data.size() - offset);
    for (std::size_t i = 0; i < n; ++i) data[offset + i] ^= block[i];
  }
}

Bytes SessionContext::seal(std::span<const std::uint8_t> plaintext) {
  if (!open_) throw Error(Errc::session_closed, "seal on a closed session");
  if (send_counter_ == UINT64_MAX) {
    open_ = false;
    throw Error(Errc::session_closed, "send counter exhausted");
  }
  const std::uint64_t counter = ++send_counter_;
  Bytes wire(id_.begin(), id_.end());
  const Bytes ctr = be64(counter);
  wire.insert(wire.end(), ctr.begin(), ctr.end());
  wire.insert(wire.end(), plaintext.begin(), plaintext.end());
  apply_keystream(side_, counter, std::span<std::uint8_t>(wire).subspan(kHeaderBytes));
  return wire;
}

Bytes SessionContext::unseal(std::span<const std::uint8_t> wire) {
  if (!open_) throw Error(Errc::session_closed, "unseal on a closed session");
  if (wire.size() < kHeaderBytes) throw Error(Errc::malformed_blob, "wire message shorter than its header");
  const std::uint64_t counter = load_be64(wire.subspan(sizeof(SessionId), 8));
  if (counter <= recv_counter_) {
    throw Error(Errc::replay_or_reorder,
                "counter " + std::to_string(counter) + " not above last accepted " + std::to_string(recv_counter_));
  }
  Bytes plaintext(wire.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes), wire.end());
  const ChannelSide peer = side_ == ChannelSide::initiator ? ChannelSide::responder : ChannelSide::initiator;
  apply_keystream(peer, counter, plaintext);
  recv_counter_ = counter;
  return plaintext;
}

SessionId peek_session_id(std::span<const std::uint8_t> wire) {
  if (wire.size() < SessionContext::kHeaderBytes) throw Error(Errc::malformed_blob, "wire message shorter than its header");
  SessionId id{};
  std::copy_n(wire.begin(), id.size(), id.begin());
  return id;
}

// ---- handshake -----------------------------------------------------------------

ClientHandshake::ClientHandshake(const Principal& self, const KeyDirectory& directory, std::string server_id, Nonce nonce)
    : self_(self), directory_(directory), server_id_(std::move(server_id)), nonce_(nonce) {}

ClientHello ClientHandshake::hello() const { return {self_.id, server_id_, self_.keys.public_key, nonce_}; }

ClientFinish ClientHandshake::on_server_hello(const ServerHello& hello) {
  if (hello.server_id != server_id_) auth_failure("unexpected server id '" + hello.server_id + "'");
  auto server = directory_.find(server_id_);
  if (!server) auth_failure("server '" + server_id_ + "' is not registered");
  if (server->keys.public_key != hello.server_public) auth_failure("server key does not match the directory");

  const std::uint64_t shared =
      pow_mod(group_element(hello.server_public, "server key"), group_element(self_.keys.private_key, "private key"));
  const Transcript t = derive(shared, this->hello(), hello.server_id, hello.server_public, hello.server_nonce);
  if (!same_digest(confirm("medguard/server-confirm", t.key, t.digest), hello.server_confirm)) {
    auth_failure("server key confirmation failed");
  }
  session_.emplace(t.id, self_.id, server_id_, t.key, ChannelSide::initiator);
  return {confirm("medguard/client-confirm", t.key, t.digest)};
}

SessionContext ClientHandshake::session() const {
  if (!session_) throw Error(Errc::auth_failure, "handshake not complete");
  return *session_;
}

ServerHandshake::ServerHandshake(const Principal& self, const KeyDirectory& directory, NonceCache& nonces, Nonce nonce)
    : self_(self), directory_(directory), nonces_(nonces), nonce_(nonce) {}

ServerHello ServerHandshake::on_client_hello(const ClientHello& hello) {
  if (hello.server_id != self_.id) auth_failure("hello addressed to '" + hello.server_id + "'");
  auto client = directory_.find(hello.client_id);
  if (!client) auth_failure("client '" + hello.client_id + "' is not registered");
  if (client->keys.public_key != hello.client_public) auth_failure("client key does not match the directory");
  if (!nonces_.insert(hello.client_nonce)) auth_failure("stale client nonce (replayed handshake)");

  const std::uint64_t shared =
      pow_mod(group_element(hello.client_public, "client key"), group_element(self_.keys.private_key, "private key"));
  const Transcript t = derive(shared, hello, self_.id, self_.keys.public_key, nonce_);
  transcript_ = t.digest;
  pending_.emplace(t.id, self_.id, hello.client_id, t.key, ChannelSide::responder);
  return {self_.id, self_.keys.public_key, nonce_, confirm("medguard/server-confirm", t.key, t.digest)};
}

SessionContext ServerHandshake::on_client_finish(const ClientFinish& finish) {
  if (!pending_) auth_failure("finish without hello");
  if (!same_digest(confirm("medguard/client-confirm", pending_->session_key(), transcript_), finish.client_confirm)) {
    pending_.reset();
    auth_failure("client key confirmation failed");
  }
  SessionContext ctx = *pending_;
  pending_.reset();
  return ctx;
}

std::pair<SessionContext, SessionContext> handshake(const Principal& client, const Principal& server,
                                                    const KeyDirectory& directory, NonceCache& nonces,
                                                    DeterministicRandom& random) {
  ClientHandshake c(client, directory, server.id, random.bytes<32>());
  ServerHandshake s(server, directory, nonces, random.bytes<32>());
  const ServerHello sh = s.on_client_hello(c.hello());
  const ClientFinish cf = c.on_server_hello(sh);
  SessionContext server_ctx = s.on_client_finish(cf);
  return {c.session(), std::move(server_ctx)};
}

}  // namespace medguard
