#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nscomp/compressors/network.hpp"
#include "nscomp/netlab/network.hpp"
#include "nscomp/netlab/train.hpp"

namespace nscomp {

using Predictor = std::function<std::vector<double>(std::span<const double>)>;

// f(x)[y] - max_{j != y} f(x)[j] per sample.
std::vector<double> margins(const Predictor& f, const Dataset& data);
std::vector<double> margins(const Network& net, const Dataset& data);

struct MarginLoss {
  double loss = 0.0;
  std::vector<double> margins;
};

// Fraction of samples whose margin is at most gamma.
MarginLoss margin_loss(const Predictor& f, const Dataset& data, double gamma);
MarginLoss margin_loss(const Network& net, const Dataset& data, double gamma);
double margin_loss_from(std::span<const double> margins, double gamma);

// sqrt(q ln r / m).
double penalty(double q, double r, double m);
double penalty_with_outliers(double q, double r, double m, double zeta);

// eps with eps^2 = gamma^2 / (2 max ||f(x)||^2).
double epsilon_from_margin(double gamma, double max_output_norm);

double q_fc(const StabilityConstants& s, std::size_t depth, std::size_t h, std::size_t m, double delta, double eps);

// c^2 d^2 / eps^2 * sum beta_i^2 ceil(kappa_i / s_i)^2 / (mu_i mu_{i->})^2.
double q_conv(const StabilityConstants& s, std::span<const std::size_t> strides, std::span<const std::size_t> widths,
              std::size_t depth, double eps);

// Filter widths and strides per layer (1 and 1 for dense layers).
struct LayerGeometry {
  std::vector<std::size_t> widths;
  std::vector<std::size_t> strides;
  std::vector<std::size_t> params;

  double ratio_sq(std::size_t layer) const;  // ceil(kappa/s)^2, 0-based layer
};
LayerGeometry geometry_of(const Network& net);

// Constants behind the capacity sum. c_layer[i] pairs with layer i + 1; the
// output layer has no activation and uses 1.
struct CapacityInputs {
  StabilityConstants constants;
  std::vector<double> c_layer;
};

struct OursBound {
  double capacity = 0.0;  // max||f||^2 / gamma^2 * sum beta^2 c_i^2 ceil(k/s)^2 / (mu mu_to)^2
  double closed_form = 0.0;   // sqrt(c^2 d^2 max||f||^2 sum beta^2 ceil(k/s)^2 / (mu mu_to)^2 / (gamma^2 m))
};

OursBound bound_ours(const CapacityInputs& in, const LayerGeometry& geo, double max_output_norm, double gamma,
                     std::size_t m);

struct Baselines {
  double l1inf = 0.0;           // prod ||A||_{1,inf} / gamma^2
  double frobenius_prod = 0.0;  // prod ||A||_F^2 / gamma^2
  double spec_l12 = 0.0;        // prod ||A||_2^2 sum ||A||_{1,2}^2 / ||A||_2^2 / gamma^2
  double spec_fro = 0.0;        // prod ||A||_2^2 sum h_i ||A||_F^2 / ||A||_2^2 / gamma^2
};

// Conv layers enter through their unrolled matrices. ||A||_{1,inf} is the
// largest row l1 norm, ||A||_{1,2} the sum of column l2 norms, h_i the larger
// side of the layer matrix.
Baselines bound_baselines(const Network& net, double gamma);

// sqrt(h d^2 max||x|| prod ||A||_2^2 sum ||A||_F^2 / ||A||_2^2 / (gamma^2 m)), dense nets.
double bound_specfro_closed_form(const Network& net, double max_input_norm, double gamma, std::size_t m);

struct EffectiveRow {
  std::size_t layer = 0;
  double effective = 0.0;  // c_i^2 beta_i^2 ceil(k/s)^2 / (mu_i mu_{i->})^2
  std::size_t actual = 0;
  double percent = 0.0;
};
std::vector<EffectiveRow> per_layer_effective(const CapacityInputs& in, const LayerGeometry& geo);

struct LipschitzGap {
  double gap = 0.0;
  double bound = 0.0;
  bool precondition = true;  // ||A^i - Ahat^i||_2 <= ||A^i||_2 / d for every layer
};
LipschitzGap lipschitz_gap(const Network& a, const Network& a_hat, std::span<const double> x);

// Operator norm of a layer acting on inputs of the given shape.
double layer_spectral_norm(const Layer& layer, Shape in);

struct BoundReport {
  double gamma = 0.0;
  double margin_loss = 0.0;
  double max_output_norm = 0.0;
  double epsilon = 0.0;
  double q_fc = 0.0;
  double q_conv = 0.0;
  double levels = 1.0;
  double penalty = 0.0;
  OursBound ours;
  Baselines baselines;
  double specfro_closed_form = 0.0;  // NaN for conv nets
  std::vector<EffectiveRow> per_layer;
  std::vector<std::string> notes;
};

struct BoundOptions {
  double delta = 0.1;
  double zeta = 0.0;
  double levels = 0.0;  // quantization levels r; 0: take them from a Matrix-Project schedule
};

BoundReport make_bound_report(const Network& net, const Dataset& data, const CapacityInputs& in, double gamma,
                              const BoundOptions& options = {});

}  // namespace nscomp
