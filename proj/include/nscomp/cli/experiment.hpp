#pragma once

#include <vector>

#include "nscomp/bounds/bounds.hpp"
#include "nscomp/cli/config.hpp"
#include "nscomp/compressors/network.hpp"
#include "nscomp/stability/stability.hpp"

namespace nscomp {

// Every stage draws from streams derived from config.seed alone.
RngStream experiment_stream(const ExperimentConfig& c, std::uint64_t stage);

// Loads dataset_path or generates the synthetic blobs; applies shuffle_labels.
Dataset prepare_dataset(const ExperimentConfig& c);

struct TrainedModel {
  Network init;
  Network net;
  TrainLog log;
  double accuracy = 0.0;
};

TrainedModel train_model(const ExperimentConfig& c, const Dataset& data);

// The first sample_cap inputs (all when 0).
std::vector<std::vector<double>> stability_samples(const ExperimentConfig& c, const Dataset& data);

double max_output_norm(const Network& net, const Dataset& data);

// c.gamma when set, otherwise the gamma_quantile training margin. Throws
// DegenerateError when that margin is not positive.
double resolve_gamma(const ExperimentConfig& c, const Network& net, const Dataset& data);

StabilityReport run_measure(const ExperimentConfig& c, const Network& net, const Dataset& data, bool smoothness);

struct CompressionOutcome {
  CompressedNetwork net;
  double gamma = 0.0;
  double eps = 0.0;
  double max_distortion = 0.0;     // max relative output distortion over the data
  double loss0_compressed = 0.0;   // margin-0 loss of the compressed net
  double loss_gamma_original = 0.0;
  std::size_t original_params = 0;
  bool svd_within_gamma = true;
  double svd_max_gap = 0.0;
};

// Helper-string seed for the compressors, fixed by the seed before any data is seen.
std::uint64_t helper_seed_for(const ExperimentConfig& c);

CompressionOutcome run_compress(const ExperimentConfig& c, const Network& net, const Dataset& data,
                                const StabilityReport& stability, double gamma, std::uint64_t helper_seed);

BoundReport run_bound(const ExperimentConfig& c, const Network& net, const Dataset& data,
                      const StabilityReport& stability, double gamma);

// curves[i-1][j-i]: mean relative error at layer j after noise at layer i.
std::vector<std::vector<double>> run_attenuation(const ExperimentConfig& c, const Network& net, const Dataset& data);

}  // namespace nscomp
