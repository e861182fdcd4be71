#pragma once

// SHA-256 (FIPS 180-4), written out in full: message padding, the 64-word
// message schedule and the compression function chained block to block from
// the standard initial hash value.
//
//     auto d = medguard::sha256::digest(bytes);
//     auto h = medguard::sha256::Hasher().update(a).update(b).finalize();

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace medguard::sha256 {

/// One 512-bit block as sixteen big-endian words.
using MessageBlock = std::array<std::uint32_t, 16>;

/// 256-bit chaining value h0..h7.
using ChainValue = std::array<std::uint32_t, 8>;

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kBlockBytes = 64;
inline constexpr std::size_t kDigestBytes = 32;

/// Largest accepted input: bit length must stay below 2^64.
inline constexpr std::uint64_t kMaxMessageBytes = (std::uint64_t{1} << 61) - 1;

inline constexpr ChainValue kInitialChain = {
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
    0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
};

/// message || 0x80 || zero fill || 64-bit big-endian bit length, split into
/// blocks. Throws Error{oversize_message} past kMaxMessageBytes.
std::vector<MessageBlock> pad_message(std::span<const std::uint8_t> message);

ChainValue compress(const ChainValue& chain, const MessageBlock& block) noexcept;

Digest serialize(const ChainValue& chain) noexcept;

Digest digest(std::span<const std::uint8_t> message);
Digest digest(std::string_view message);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Streaming form of digest(). Single owner; movable, not meant to be shared.
class Hasher {
 public:
  Hasher() = default;

  Hasher& update(std::span<const std::uint8_t> bytes);
  Hasher& update(std::string_view bytes);

  /// Pads, compresses the tail and returns the digest. The hasher is reset
  /// afterwards and can be reused.
  Digest finalize();

  std::uint64_t bytes_consumed() const noexcept { return total_bytes_; }

 private:
  void reset() noexcept;

  ChainValue chain_ = kInitialChain;
  std::array<std::uint8_t, kBlockBytes> buffer_{};
  std::size_t buffered_ = 0;
  std::uint64_t total_bytes_ = 0;
};

/// Big-endian load of a 64-byte block.
MessageBlock load_block(std::span<const std::uint8_t, kBlockBytes> bytes) noexcept;

}  // namespace medguard::sha256
