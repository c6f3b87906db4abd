#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nscomp/compressors/network.hpp"
#include "nscomp/netlab/network.hpp"
#include "nscomp/numkit/linalg.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

using Samples = std::span<const std::vector<double>>;

// Maps an input vector to an output vector.
using VectorMap = std::function<std::vector<double>(std::span<const double>)>;

struct NoiseSensitivity {
  double psi = 0.0;
  double std_error = 0.0;
};

// psi = E ||M(x + eta ||x||) - M(x)||^2 / ||M(x)||^2 with eta ~ N(0, I).
NoiseSensitivity noise_sensitivity(const VectorMap& m, std::span<const double> x, std::size_t trials,
                                   RngStream stream);
NoiseSensitivity noise_sensitivity(const DenseMatrix& m, std::span<const double> x, std::size_t trials,
                                   RngStream stream);

// Extremum of a per-sample distribution after dropping outliers. NaN entries
// are excluded samples and count toward the allowed ζ fraction. `lower`
// selects the min-type statistic (cushions), otherwise max-type (c).
double robust_extremum(std::span<const double> values, double zeta, bool lower);

// Empirical q-quantile: the sorted element at floor(q n). +inf entries sort last.
double lower_quantile(std::vector<double> values, double q);

// Per-sample mu_i for every layer: out[i-1][s].
std::vector<std::vector<double>> layer_cushion_samples(const Network& net, Samples samples);
std::vector<double> layer_cushion(const Network& net, Samples samples, double zeta = 0.0);

// Per-sample ||J^{i,j} x^i|| / (scale ||J^{i,j}||_F ||x^i||), scale = 1/sqrt(n1 n2) when conv is set.
std::vector<double> interlayer_cushion_samples(const Network& net, Samples samples, std::size_t i, std::size_t j,
                                               bool conv);
double interlayer_cushion(const Network& net, Samples samples, std::size_t i, std::size_t j, bool conv,
                          double zeta = 0.0);

// Per-sample max over i of ||x^i|| / ||phi(x^i)||, and per-layer ratios out[i-1][s] for i = 1..d-1.
std::vector<std::vector<double>> activation_contraction_samples(const Network& net, Samples samples);
double activation_contraction(const Network& net, Samples samples, double zeta = 0.0);

// beta over samples for the Jacobian J^{i,j}, grouping columns by the pixel of x^i.
double jacobian_beta(const Network& net, Samples samples, std::size_t i, std::size_t j);

enum class NoiseSource { Gaussian, Compression, Custom };

// Custom noise: (sample index, layer i, trial, x^i) -> eta.
using NoiseGenerator =
    std::function<std::vector<double>(std::size_t, std::size_t, std::size_t, std::span<const double>)>;

struct SmoothnessOptions {
  double delta = 0.1;
  std::size_t trials = 200;
  NoiseSource source = NoiseSource::Compression;
  double gaussian_rel_norm = 0.1;  // ||eta|| / ||x^i|| in Gaussian mode
  double compression_eps = 0.1;    // eps of the matrix_project draw in compression mode
  double compression_work_limit = 1e6;  // Gaussian-limit sampler above this many draws
  NoiseGenerator custom;
  std::size_t sample_cap = 0;  // 0: use every sample
};

struct SmoothnessResult {
  double rho = std::numeric_limits<double>::infinity();  // +inf: every sampled segment was exactly linear
  double delta = 0.1;
  std::size_t worst_sample = 0, worst_i = 0, worst_j = 0;
};

SmoothnessResult interlayer_smoothness(const Network& net, Samples samples, const SmoothnessOptions& options,
                                       RngStream stream);

// curves[i-1][j-i] = mean over samples of the inject_noise curve from layer i, i = 1..d-1.
std::vector<std::vector<double>> attenuation_profile(const Network& net, Samples samples, double rel_norm,
                                                     RngStream stream);

struct StabilityOptions {
  double zeta = 0.0;
  // Conv scaling of the interlayer cushion; defaults to on for nets with conv layers.
  enum class CushionMode { Auto, Dense, Conv } cushion_mode = CushionMode::Auto;
  bool measure_smoothness = true;
  SmoothnessOptions smoothness;
  std::size_t jacobian_sample_cap = 0;  // 0: every sample
  std::uint64_t seed = 0;
};

struct StabilityReport {
  std::size_t depth = 0;
  std::size_t samples = 0;
  double zeta = 0.0;
  bool conv_cushion = false;
  std::vector<double> mu;                  // mu[i-1]
  std::vector<std::vector<double>> mu_ij;  // mu_ij[i-1][j-1] for j >= i, NaN below the diagonal
  std::vector<double> mu_to;
  std::vector<double> c_layer;  // c_layer[i-1], i = 1..d-1
  double c = 1.0;
  bool rho_measured = false;
  SmoothnessResult rho;
  std::vector<double> beta;  // 1 for dense layers
  std::size_t excluded = 0;
  std::vector<std::string> warnings;

  // Per-sample distributions (NaN marks an excluded sample).
  std::vector<std::vector<double>> mu_samples;                 // [i-1][s]
  std::vector<std::vector<std::vector<double>>> mu_ij_samples;  // [i-1][j-1][s], empty for j <= i
  std::vector<std::vector<double>> c_samples;                  // [i-1][s]

  StabilityConstants constants() const;
};

StabilityReport measure_stability(const Network& net, Samples samples, const StabilityOptions& options = {});

}  // namespace nscomp
