#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "nscomp/numkit/tensor.hpp"

namespace nscomp {

struct DenseLayer {
  DenseMatrix weights;
};

struct ConvLayer {
  ConvFilter filter;
  std::size_t stride = 1;
};

using Layer = std::variant<DenseLayer, ConvLayer>;

// Output shape of `layer` applied to an activation of shape `in`. Throws
// ShapeError when they do not compose.
Shape layer_output_shape(const Layer& layer, Shape in);

// y = layer(x), linear part only.
void apply_layer(const Layer& layer, Shape in, std::span<const double> x, std::span<double> y);

// Explicit matrix of the layer's linear map (conv layers are unrolled).
DenseMatrix layer_matrix(const Layer& layer, Shape in);

// Valid strided convolution; output is out_channels x n1' x n2' with
// n' = floor((n - width) / stride) + 1.
FeatureMap conv_forward(const ConvFilter& filter, std::size_t stride, const FeatureMap& input);

std::size_t layer_param_count(const Layer& layer);
double layer_frobenius_norm(const Layer& layer);
void scale_layer(Layer& layer, double factor);
bool is_conv(const Layer& layer);

// ReLU network x^i = A^i phi(x^{i-1}). layers[k] holds A^{k+1}; the raw input
// x^0 enters the first layer unrectified.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<Layer> layers);

  std::size_t depth() const { return layers_.size(); }
  Shape input_shape() const { return shapes_.front(); }
  // Shape of x^i for i = 0..depth().
  Shape shape(std::size_t i) const { return shapes_.at(i); }
  const std::vector<Layer>& layers() const { return layers_; }
  // A^i for i = 1..depth().
  const Layer& layer(std::size_t i) const { return layers_.at(i - 1); }
  Layer& mutable_layer(std::size_t i) { return layers_.at(i - 1); }
  std::size_t param_count() const;
  bool has_conv() const;

  // f_A(x) = x^d.
  std::vector<double> forward(std::span<const double> x) const;
  // M^{i,j}: maps a layer-i pre-activation to the layer-j pre-activation.
  std::vector<double> propagate(std::size_t i, std::size_t j, std::span<const double> xi) const;

 private:
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
};

// Pre-activations x^0..x^d and ReLU indicators. masks[0] is all ones because
// the raw input is not rectified.
struct ActivationTrace {
  std::vector<std::vector<double>> x;
  std::vector<std::vector<std::uint8_t>> masks;

  std::size_t depth() const { return x.size() - 1; }
  // phi(x^i), with phi(x^0) = x^0.
  std::vector<double> activated(std::size_t i) const;
};

ActivationTrace forward_trace(const Network& net, std::span<const double> x);

void relu_inplace(std::span<double> v);

// Rescales layers so every ||A^i||_F equals the geometric mean of the norms.
// The function computed is unchanged because ReLU is positively homogeneous.
Network rebalance(const Network& net);

}  // namespace nscomp
