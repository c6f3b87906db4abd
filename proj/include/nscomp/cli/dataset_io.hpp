#pragma once

#include <string>

#include "nscomp/netlab/train.hpp"

namespace nscomp {

// Binary layout, little-endian: "NSDS", u32 count, u32 rank, u32 dims[rank],
// u32 classes, f32 inputs[count * size], u32 labels[count]. rank is 1 for
// vectors and 3 (channels, height, width) for images.
void save_dataset_binary(const Dataset& data, const std::string& path);

// One record per line, label last. A leading "# shape C H W classes K" line
// carries the shape; without it the data is flat and classes = max label + 1.
// Values are written at float precision so both encodings load identically.
void save_dataset_csv(const Dataset& data, const std::string& path);

// Binary when the file starts with the magic, CSV otherwise. Inputs are
// rounded to float in both cases.
Dataset load_dataset(const std::string& path);

Dataset dataset_from_binary(const std::string& bytes);
Dataset dataset_from_csv(const std::string& text);

}  // namespace nscomp
