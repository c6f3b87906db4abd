#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nscomp/compressors/conv.hpp"
#include "nscomp/compressors/matrix.hpp"
#include "nscomp/netlab/network.hpp"

namespace nscomp {

// The measured constants the compression schedules need, indexed by layer
// (entry k belongs to A^{k+1}).
struct StabilityConstants {
  std::vector<double> mu;     // layer cushion
  std::vector<double> mu_to;  // minimal interlayer cushion
  double c = 1.0;             // activation contraction
  std::vector<double> beta;   // well-distributedness (1 for dense layers)
};

struct CompressedNetwork {
  Network original_shape;  // shapes and strides of the source network
  std::vector<CompressedLayer> layers;
  Scheme scheme = Scheme::MatrixProject;
  double epsilon = 0.0;
  std::vector<double> per_layer_eps;
  double eta = 0.0;
  double svd_delta = 0.0;  // only for the SVD scheme

  std::size_t total_params() const;
  std::size_t max_levels() const;
  std::vector<double> forward(std::span<const double> x) const;
  // Network with the shared (per-layer) effective weights.
  Network shared_network() const;
};

struct CompressOptions {
  double eta_override = 0.0;  // 0: network_eta(net, delta, m)
  double denominator = 6.0;  // d in eps_i = eps mu_i mu_{i->} / (denominator c d [beta])
  ConvProjectOptions conv;
  MatrixProjectOptions dense;
};

// eta = delta / (6 d^2 h^2 m), h the widest layer.
double network_eta(const Network& net, double delta, std::size_t m);

// Per-layer eps_i for the projection schedules.
std::vector<double> per_layer_eps(const StabilityConstants& s, double eps, std::size_t depth, double denominator,
                                  bool use_beta);

// Target parameter count 72 c^2 d^2 ln(m d h / delta) / eps^2 * sum 1/(mu_i mu_{i->})^2.
double fc_target_params(const StabilityConstants& s, double eps, double delta, std::size_t m, std::size_t depth,
                        std::size_t h);

CompressedNetwork compress_network_fc(const Network& net, const StabilityConstants& s, double eps, double delta,
                                      std::size_t m, const HelperString& helper, const CompressOptions& options = {});

CompressedNetwork compress_network_conv(const Network& net, const StabilityConstants& s, double eps, double delta,
                                        std::size_t m, const HelperString& helper,
                                        const CompressOptions& options = {});

struct SvdCompressOptions {
  double constant = 3.0;  // C in delta = gamma / (C ||x|| d prod ||A^i||_2)
};

struct SvdCompressResult {
  CompressedNetwork net;
  double max_gap = 0.0;  // max over inputs of ||f_A(x) - f_Ahat(x)||
  bool within_gamma = true;
};

SvdCompressResult compress_network_svd(const Network& net, double gamma, std::span<const std::vector<double>> inputs,
                                       const SvdCompressOptions& options = {});

// max over inputs of ||f_A(x) - g(x)|| / ||f_A(x)||.
double max_relative_distortion(const Network& net, const CompressedNetwork& g,
                               std::span<const std::vector<double>> inputs);

}  // namespace nscomp
