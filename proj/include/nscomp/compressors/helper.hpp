#pragma once

#include <cstdint>
#include <string>

#include "nscomp/numkit/rng.hpp"

namespace nscomp {

enum class Scheme { SvdTruncate, MatrixProject, ConvPwiseProject, VectorCompress, VectorProject };

std::string scheme_name(Scheme s);

// Randomness fixed before any data is seen. Every random matrix or subspace a
// compressor uses is derived from (master_seed, scheme, layer).
struct HelperString {
  std::uint64_t master_seed = 0;
  Scheme scheme = Scheme::MatrixProject;

  RngStream stream(std::uint64_t layer = 0) const {
    return RngStream(master_seed, mix64(0x48454C50ull + static_cast<std::uint64_t>(scheme))).derive(layer);
  }
};

}  // namespace nscomp
