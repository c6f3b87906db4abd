#include "nscomp/numkit/rng.hpp"

#include <cmath>
#include <numbers>

namespace nscomp {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

enum Domain : std::uint32_t { kBits = 1, kUniform = 2, kNormal = 3, kSign = 4 };

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit_open(std::uint64_t x) {
  // 53 random bits, shifted by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream RngStream::derive(std::uint64_t child) const {
  return RngStream(seed_, mix64(id_ ^ mix64(child + 0x632BE59BD9B4E019ull)));
}

std::array<std::uint32_t, 4> RngStream::block(std::uint64_t block_index, std::uint32_t domain) const {
  const std::uint64_t k = mix64(seed_ ^ (static_cast<std::uint64_t>(domain) << 56));
  return philox4x32({static_cast<std::uint32_t>(block_index), static_cast<std::uint32_t>(block_index >> 32),
                     static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)},
                    {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
}

std::uint64_t RngStream::bits(std::uint64_t index) const {
  const auto b = block(index >> 1, kBits);
  return (index & 1) ? (static_cast<std::uint64_t>(b[3]) << 32 | b[2])
                     : (static_cast<std::uint64_t>(b[1]) << 32 | b[0]);
}

double RngStream::uniform(std::uint64_t index) const {
  const auto b = block(index >> 1, kUniform);
  const std::uint64_t x = (index & 1) ? (static_cast<std::uint64_t>(b[3]) << 32 | b[2])
                                      : (static_cast<std::uint64_t>(b[1]) << 32 | b[0]);
  return to_unit_open(x);
}

double RngStream::normal(std::uint64_t index) const {
  // Box-Muller: one block yields the (cos, sin) pair for indices 2n and 2n+1.
  const auto b = block(index >> 1, kNormal);
  const double u1 = to_unit_open(static_cast<std::uint64_t>(b[1]) << 32 | b[0]);
  const double u2 = to_unit_open(static_cast<std::uint64_t>(b[3]) << 32 | b[2]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
}

double RngStream::sign(std::uint64_t index) const {
  const auto b = block(index >> 7, kSign);
  const unsigned bit = static_cast<unsigned>(index & 127);
  return ((b[bit >> 5] >> (bit & 31)) & 1u) ? 1.0 : -1.0;
}

void RngStream::fill_signs(std::uint64_t start, std::span<double> out) const {
  std::size_t t = 0;
  while (t < out.size()) {
    const std::uint64_t index = start + t;
    const auto b = block(index >> 7, kSign);
    unsigned bit = static_cast<unsigned>(index & 127);
    for (; bit < 128 && t < out.size(); ++bit, ++t) {
      out[t] = ((b[bit >> 5] >> (bit & 31)) & 1u) ? 1.0 : -1.0;
    }
  }
}

void RngStream::fill_normals(std::uint64_t start, std::span<double> out) const {
  std::size_t t = 0;
  while (t < out.size()) {
    const std::uint64_t index = start + t;
    const auto b = block(index >> 1, kNormal);
    const double u1 = to_unit_open(static_cast<std::uint64_t>(b[1]) << 32 | b[0]);
    const double u2 = to_unit_open(static_cast<std::uint64_t>(b[3]) << 32 | b[2]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    if ((index & 1) == 0) {
      out[t++] = radius * std::cos(angle);
      if (t < out.size()) out[t++] = radius * std::sin(angle);
    } else {
      out[t++] = radius * std::sin(angle);
    }
  }
}

}  // namespace nscomp
