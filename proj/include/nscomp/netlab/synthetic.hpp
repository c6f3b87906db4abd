#pragma once

#include <cstddef>

#include "nscomp/netlab/train.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

struct BlobConfig {
  std::size_t count = 1000;
  std::size_t classes = 10;
  // Vector data: `features` coordinates. Image data: channels x size x size.
  std::size_t features = 20;
  std::size_t channels = 0;
  std::size_t size = 0;
  double spread = 0.5;  // within-class noise scale relative to the class mean
};

// Gaussian class blobs. Each input is normalized to unit norm and gets a
// constant bias part of norm one: one extra coordinate for vectors, one
// extra constant channel for images. Labels cycle through the classes.
Dataset make_blobs(const BlobConfig& config, const RngStream& stream);

// Copy of `data` with labels randomly permuted across samples.
Dataset shuffle_labels(const Dataset& data, const RngStream& stream);

}  // namespace nscomp
