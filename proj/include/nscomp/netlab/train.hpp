#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nscomp/netlab/network.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

// Labelled inputs. Labels are 0-based class indices.
struct Dataset {
  Shape input_shape;
  std::vector<std::vector<double>> inputs;
  std::vector<std::uint32_t> labels;
  std::uint32_t classes = 0;

  std::size_t size() const { return inputs.size(); }
  // Throws on empty data, wrong input lengths or out-of-range labels.
  void validate() const;
};

struct LayerSpec {
  enum class Kind { Dense, Conv } kind = Kind::Dense;
  std::size_t outputs = 0;  // units or output channels
  std::size_t width = 1;    // conv filter width
  std::size_t stride = 1;
};

// He-initialized network of the given architecture.
Network init_network(Shape input_shape, const std::vector<LayerSpec>& arch, RngStream stream);

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
  std::vector<double> validation_accuracy;
};

struct TrainResult {
  Network net;
  TrainLog log;
};

// Minibatch SGD with momentum on softmax cross-entropy of the output x^d.
// Throws TrainingError when the loss stops being finite.
TrainResult train_sgd(Network init, const Dataset& data, const TrainConfig& config,
                      const Dataset* validation = nullptr);

std::size_t argmax(const std::vector<double>& v);
double accuracy(const Network& net, const Dataset& data);

// Fisher-Yates permutation of 0..n-1 drawn from `stream`.
std::vector<std::size_t> permutation(std::size_t n, const RngStream& stream);

}  // namespace nscomp
