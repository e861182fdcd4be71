#include "medguard/sha256.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "medguard/error.hpp"

namespace medguard::sha256 {
namespace {

constexpr std::array<std::uint32_t, 64> kRoundConstants = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
};

constexpr std::uint32_t ch(std::uint32_t x, std::uint32_t y, std::uint32_t z) { return (x & y) ^ (~x & z); }
constexpr std::uint32_t maj(std::uint32_t x, std::uint32_t y, std::uint32_t z) { return (x & y) ^ (x & z) ^ (y & z); }
constexpr std::uint32_t big_sigma0(std::uint32_t x) { return std::rotr(x, 2) ^ std::rotr(x, 13) ^ std::rotr(x, 22); }
constexpr std::uint32_t big_sigma1(std::uint32_t x) { return std::rotr(x, 6) ^ std::rotr(x, 11) ^ std::rotr(x, 25); }
constexpr std::uint32_t small_sigma0(std::uint32_t x) { return std::rotr(x, 7) ^ std::rotr(x, 18) ^ (x >> 3); }
constexpr std::uint32_t small_sigma1(std::uint32_t x) { return std::rotr(x, 17) ^ std::rotr(x, 19) ^ (x >> 10); }

void check_length(std::uint64_t bytes) {
  if (bytes > kMaxMessageBytes) {
    throw Error(Errc::oversize_message, "message bit length must be below 2^64");
  }
}

void store_length(std::uint8_t* out, std::uint64_t total_bytes) {
  const std::uint64_t bits = total_bytes * 8;
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
  }
}

}  // namespace

MessageBlock load_block(std::span<const std::uint8_t, kBlockBytes> bytes) noexcept {
  MessageBlock block{};
  for (std::size_t i = 0; i < block.size(); ++i) {
    block[i] = (std::uint32_t{bytes[4 * i]} << 24) | (std::uint32_t{bytes[4 * i + 1]} << 16) |
               (std::uint32_t{bytes[4 * i + 2]} << 8) | std::uint32_t{bytes[4 * i + 3]};
  }
  return block;
}

std::vector<MessageBlock> pad_message(std::span<const std::uint8_t> message) {
  check_length(message.size());
  const std::uint64_t bits = std::uint64_t{message.size()} * 8;
  const std::size_t block_count = static_cast<std::size_t>((bits + 65 + 511) / 512);

  std::vector<std::uint8_t> padded(block_count * kBlockBytes, 0);
  if (!message.empty()) {
    std::memcpy(padded.data(), message.data(), message.size());
  }
  padded[message.size()] = 0x80;
  store_length(padded.data() + padded.size() - 8, message.size());

  std::vector<MessageBlock> blocks;
  blocks.reserve(block_count);
  for (std::size_t b = 0; b < block_count; ++b) {
    blocks.push_back(load_block(std::span<const std::uint8_t, kBlockBytes>(padded.data() + b * kBlockBytes, kBlockBytes)));
  }
  return blocks;
}

ChainValue compress(const ChainValue& chain, const MessageBlock& block) noexcept {
  std::array<std::uint32_t, 64> w{};
  for (std::size_t t = 0; t < 16; ++t) w[t] = block[t];
  for (std::size_t t = 16; t < 64; ++t) {
    w[t] = small_sigma1(w[t - 2]) + w[t - 7] + small_sigma0(w[t - 15]) + w[t - 16];
  }

  auto [a, b, c, d, e, f, g, h] = chain;
  for (std::size_t t = 0; t < 64; ++t) {
    const std::uint32_t t1 = h + big_sigma1(e) + ch(e, f, g) + kRoundConstants[t] + w[t];
    const std::uint32_t t2 = big_sigma0(a) + maj(a, b, c);
    h = g;
    g = f;
    f = e;
    e = d + t1;
    d = c;
    c = b;
    b = a;
    a = t1 + t2;
  }

  return {chain[0] + a, chain[1] + b, chain[2] + c, chain[3] + d,
          chain[4] + e, chain[5] + f, chain[6] + g, chain[7] + h};
}

Digest serialize(const ChainValue& chain) noexcept {
  Digest out{};
  for (std::size_t i = 0; i < chain.size(); ++i) {
    out[4 * i] = static_cast<std::uint8_t>(chain[i] >> 24);
    out[4 * i + 1] = static_cast<std::uint8_t>(chain[i] >> 16);
    out[4 * i + 2] = static_cast<std::uint8_t>(chain[i] >> 8);
    out[4 * i + 3] = static_cast<std::uint8_t>(chain[i]);
  }
  return out;
}

Digest digest(std::span<const std::uint8_t> message) {
  return Hasher().update(message).finalize();
}

Digest digest(std::string_view message) {
  return Hasher().update(message).finalize();
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Hasher& Hasher::update(std::span<const std::uint8_t> bytes) {
  check_length(total_bytes_ + bytes.size());
  total_bytes_ += bytes.size();

  std::size_t offset = 0;
  if (buffered_ > 0) {
    const std::size_t take = std::min(kBlockBytes - buffered_, bytes.size());
    std::memcpy(buffer_.data() + buffered_, bytes.data(), take);
    buffered_ += take;
    offset = take;
    if (buffered_ < kBlockBytes) return *this;
    chain_ = compress(chain_, load_block(buffer_));
    buffered_ = 0;
  }
  while (bytes.size() - offset >= kBlockBytes) {
    chain_ = compress(chain_, load_block(bytes.subspan(offset).first<kBlockBytes>()));
    offset += kBlockBytes;
  }
  const std::size_t rest = bytes.size() - offset;
  if (rest > 0) {
    std::memcpy(buffer_.data(), bytes.data() + offset, rest);
    buffered_ = rest;
  }
  return *this;
}

Hasher& Hasher::update(std::string_view bytes) {
  return update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

Digest Hasher::finalize() {
  // 0x80 terminator, then zeros up to 56 mod 64, then the bit length.
  buffer_[buffered_++] = 0x80;
  if (buffered_ > kBlockBytes - 8) {
    std::fill(buffer_.begin() + static_cast<std::ptrdiff_t>(buffered_), buffer_.end(), 0);
    chain_ = compress(chain_, load_block(buffer_));
    buffered_ = 0;
  }
  std::fill(buffer_.begin() + static_cast<std::ptrdiff_t>(buffered_), buffer_.end() - 8, 0);
  store_length(buffer_.data() + kBlockBytes - 8, total_bytes_);
  chain_ = compress(chain_, load_block(buffer_));

  const Digest out = serialize(chain_);
  reset();
  return out;
}

void Hasher::reset() noexcept {
  chain_ = kInitialChain;
  buffer_.fill(0);
  buffered_ = 0;
  total_bytes_ = 0;
}

}  // namespace medguard::sha256
