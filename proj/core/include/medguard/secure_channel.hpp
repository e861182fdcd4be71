#pragma once

// Desk-scale stand-in for the SSH tunnel between parties. It is NOT
// production cryptography:
//   - keys are a Diffie-Hellman pair in the multiplicative group mod the
//     Mersenne prime 2^61-1 (discrete log at this size is easy);
//   - the handshake is registered-key lookup + nonce exchange + key
//     confirmation, session_key = SHA-256(static DH secret || transcript);
//   - payloads are XORed with a SHA-256 counter-mode keystream and carry no
//     MAC. Integrity comes from the SignedBlob digest inside the payload.
// Swap-in point for a real transport: SessionContext::seal/unseal and the
// ClientHandshake/ServerHandshake pair.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medguard/record.hpp"

namespace medguard {

using Seed = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, 32>;
using SessionKey = std::array<std::uint8_t, 32>;
using SessionId = std::array<std::uint8_t, 16>;

/// Deterministic byte source: block i = SHA-256(seed || label || i).
class DeterministicRandom {
 public:
  explicit DeterministicRandom(std::uint64_t seed, std::string_view label = "medguard/rng");

  void fill(std::span<std::uint8_t> out);
  template <std::size_t N>
  std::array<std::uint8_t, N> bytes() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }
  std::uint64_t next_u64();
  /// Uniform in [0, bound).
  std::uint64_t uniform(std::uint64_t bound);

 private:
  Bytes prefix_;
  std::uint64_t counter_ = 0;
  sha256::Digest block_{};
  std::size_t used_ = sha256::kDigestBytes;
};

struct KeyPair {
  Bytes public_key;   // 8 bytes, big-endian group element
  Bytes private_key;  // 8 bytes, big-endian exponent; empty in directory copies

  friend bool operator==(const KeyPair&, const KeyPair&) = default;
};

KeyPair generate_keypair(const Seed& seed);

/// Derives the public half; throws Error{invalid_argument} on a malformed key.
Bytes public_from_private(std::span<const std::uint8_t> private_key);

enum class Role { patient, physician, caregiver, researcher, microcontroller, cloud };

std::string_view to_string(Role role) noexcept;
std::optional<Role> parse_role(std::string_view text) noexcept;

enum class Privilege : std::uint8_t {
  read_records = 1 << 0,
  write_records = 1 << 1,
  issue_command = 1 << 2,
  change_schedule = 1 << 3,
};

std::string_view to_string(Privilege p) noexcept;
std::optional<Privilege> parse_privilege(std::string_view text) noexcept;

class PrivilegeSet {
 public:
  constexpr PrivilegeSet() = default;
  constexpr PrivilegeSet(std::initializer_list<Privilege> ps) {
    for (auto p : ps) bits_ |= static_cast<std::uint8_t>(p);
  }

  constexpr bool contains(Privilege p) const noexcept { return (bits_ & static_cast<std::uint8_t>(p)) != 0; }
  constexpr void insert(Privilege p) noexcept { bits_ |= static_cast<std::uint8_t>(p); }
  constexpr bool empty() const noexcept { return bits_ == 0; }

  /// Comma separated, "-" when empty.
  std::string to_string() const;
  static PrivilegeSet parse(std::string_view text);

  friend constexpr bool operator==(PrivilegeSet, PrivilegeSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

PrivilegeSet default_privileges(Role role) noexcept;

struct Principal {
  std::string id;
  Role role = Role::patient;
  KeyPair keys;
  PrivilegeSet privileges;
  std::set<std::string> linked_patients;
  bool research_consent = false;  // researchers only: access granted under a data agreement

  /// Builds a principal with the role's default privileges and checks the
  /// role/privilege invariants.
  static Principal create(std::string id, Role role, KeyPair keys, std::set<std::string> linked_patients = {},
                          bool research_consent = false);

  /// Throws Error{invalid_argument} when command privileges are held by a role
  /// other than physician/caregiver, or a researcher holds anything but reads.
  void check_invariants() const;

  Principal public_view() const;
};

enum class Decision { allow, deny };

/// Deny unless the action is in the principal's privileges and the principal
/// is linked to the patient (researchers: read_records under consent).
Decision authorize(const Principal& principal, Privilege action, std::string_view patient_id) noexcept;

/// Registered public identities. Concurrent lookups are safe; registration
/// takes an exclusive lock.
class KeyDirectory {
 public:
  KeyDirectory() = default;
  KeyDirectory(const KeyDirectory& other);
  KeyDirectory& operator=(const KeyDirectory& other);

  /// Stores the public view; throws Error{invalid_argument} on a duplicate id.
  void register_principal(const Principal& principal);
  std::optional<Principal> find(std::string_view id) const;
  std::size_t size() const;
  std::vector<Principal> entries() const;

  /// One line per principal:
  ///   <id> <role> <public-key-hex> <privileges|-> [patients=a,b] [research_consent]
  std::string serialize() const;
  static KeyDirectory parse(std::string_view text);
  void save(const std::string& path) const;
  static KeyDirectory load(const std::string& path);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, Principal, std::less<>> entries_;
};

/// Nonces seen by a responder; a repeated client nonce is a replay.
class NonceCache {
 public:
  bool insert(const Nonce& nonce);

 private:
  std::mutex mutex_;
  std::set<Nonce> seen_;
};

enum class ChannelSide : std::uint8_t { initiator = 0x01, responder = 0x02 };

class SessionContext {
 public:
  static constexpr std::size_t kHeaderBytes = sizeof(SessionId) + 8;

  SessionContext(SessionId id, std::string local_id, std::string peer_id, SessionKey key, ChannelSide side);

  /// session_id || counter (u64 BE) || plaintext XOR keystream.
  Bytes seal(std::span<const std::uint8_t> plaintext);

  /// Rejects counters not above the last accepted one. The session id is a
  /// routing tag and is not checked here.
  Bytes unseal(std::span<const std::uint8_t> wire);

  void close() noexcept { open_ = false; }
  bool is_open() const noexcept { return open_; }

  const SessionId& session_id() const noexcept { return id_; }
  const std::string& local_id() const noexcept { return local_id_; }
  const std::string& peer_id() const noexcept { return peer_id_; }
  const SessionKey& session_key() const noexcept { return key_; }
  std::uint64_t send_counter() const noexcept { return send_counter_; }
  std::uint64_t recv_counter() const noexcept { return recv_counter_; }

 private:
  void apply_keystream(ChannelSide direction, std::uint64_t counter, std::span<std::uint8_t> data) const;

  SessionId id_;
  std::string local_id_;
  std::string peer_id_;
  SessionKey key_;
  ChannelSide side_;
  std::uint64_t send_counter_ = 0;
  std::uint64_t recv_counter_ = 0;
  bool open_ = true;
};

/// Reads the session id from a wire message without decrypting it.
SessionId peek_session_id(std::span<const std::uint8_t> wire);

struct ClientHello {
  std::string client_id;
  std::string server_id;
  Bytes client_public;
  Nonce client_nonce{};
};

struct ServerHello {
  std::string server_id;
  Bytes server_public;
  Nonce server_nonce{};
  sha256::Digest server_confirm{};
};

struct ClientFinish {
  sha256::Digest client_confirm{};
};

class ClientHandshake {
 public:
  ClientHandshake(const Principal& self, const KeyDirectory& directory, std::string server_id, Nonce nonce);

  ClientHello hello() const;

  /// Checks the server's key against the directory and its key confirmation.
  /// Throws Error{auth_failure}.
  ClientFinish on_server_hello(const ServerHello& hello);

  SessionContext session() const;

 private:
  const Principal& self_;
  const KeyDirectory& directory_;
  std::string server_id_;
  Nonce nonce_;
  std::optional<SessionContext> session_;
};

class ServerHandshake {
 public:
  ServerHandshake(const Principal& self, const KeyDirectory& directory, NonceCache& nonces, Nonce nonce);

  /// Throws Error{auth_failure} for an unregistered or mismatched client key,
  /// a wrong server id, or a client nonce seen before.
  ServerHello on_client_hello(const ClientHello& hello);

  /// Throws Error{auth_failure} when the client cannot confirm the key.
  SessionContext on_client_finish(const ClientFinish& finish);

 private:
  const Principal& self_;
  const KeyDirectory& directory_;
  NonceCache& nonces_;
  Nonce nonce_;
  std::optional<SessionContext> pending_;
  sha256::Digest transcript_{};
};

/// Runs both sides in-process. Returns {client context, server context}.
std::pair<SessionContext, SessionContext> handshake(const Principal& client, const Principal& server,
                                                    const KeyDirectory& directory, NonceCache& nonces,
                                                    DeterministicRandom& random);

}  // namespace medguard
