#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nscomp/netlab/network.hpp"

namespace nscomp {

inline constexpr int kModelFormatVersion = 1;

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double accuracy = 0.0;
};

struct ModelFile {
  Network net;
  std::optional<TrainingMeta> training;
};

// Weights are written with the shortest decimal form that round-trips, so
// load(save(net)) is bit-exact.
std::string model_to_json(const Network& net, const std::optional<TrainingMeta>& meta = std::nullopt);

// Throws ParseError naming the byte offset (syntax) or the JSON path
// (structure), and ShapeError naming the layer index when shapes do not compose.
ModelFile model_from_json(const std::string& text);

void save_model(const Network& net, const std::string& path, const std::optional<TrainingMeta>& meta = std::nullopt);
ModelFile load_model(const std::string& path);

}  // namespace nscomp
