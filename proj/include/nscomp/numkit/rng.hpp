#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace nscomp {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// A reproducible random stream identified by (master_seed, stream_id).
//
// Every draw is a pure function of (master_seed, stream_id, index), so a
// stream can be read at random positions from any thread. The sequential
// next_*() helpers keep a cursor for callers that just want "the next"
// value; copies carry their own cursor.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id) : seed_(master_seed), id_(stream_id) {}

  std::uint64_t master_seed() const { return seed_; }
  std::uint64_t stream_id() const { return id_; }

  // Child stream with an id derived from (stream_id, child); cursor reset.
  RngStream derive(std::uint64_t child) const;

  std::uint64_t bits(std::uint64_t index) const;
  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t index) const;
  double normal(std::uint64_t index) const;
  // +1.0 or -1.0 with probability 1/2. 128 signs share one Philox block.
  double sign(std::uint64_t index) const;

  // Bulk helpers: out[t] = sign(start + t) / normal(start + t), reusing
  // Philox blocks across neighbouring indices.
  void fill_signs(std::uint64_t start, std::span<double> out) const;
  void fill_normals(std::uint64_t start, std::span<double> out) const;

  double next_uniform() { return uniform(cursor_++); }
  double next_normal() { return normal(cursor_++); }
  double next_sign() { return sign(cursor_++); }
  std::uint64_t next_bits() { return bits(cursor_++); }
  std::uint64_t cursor() const { return cursor_; }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t block_index, std::uint32_t domain) const;

  std::uint64_t seed_ = 0;
  std::uint64_t id_ = 0;
  std::uint64_t cursor_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace nscomp
