#include "nscomp/netlab/network.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

namespace {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

}  // namespace

Shape layer_output_shape(const Layer& layer, Shape in) {
  return std::visit(
      Overload{
          [&](const DenseLayer& d) {
            if (d.weights.cols() != in.size()) {
              throw ShapeError("dense layer expects " + std::to_string(d.weights.cols()) + " inputs, got " +
                               in.str());
            }
            return Shape::flat(d.weights.rows());
          },
          [&](const ConvLayer& c) {
            const ConvFilter& f = c.filter;
            if (c.stride == 0) throw ShapeError("conv layer stride must be >= 1");
            if (f.in_channels() != in.channels) {
              throw ShapeError("conv layer expects " + std::to_string(f.in_channels()) + " channels, got " +
                               in.str());
            }
            if (f.width() > in.height || f.width() > in.width) {
              throw ShapeError("conv filter width " + std::to_string(f.width()) + " exceeds input " + in.str());
            }
            return Shape{f.out_channels(), kernels::conv_out_size(in.height, f.width(), c.stride),
                         kernels::conv_out_size(in.width, f.width(), c.stride)};
          },
      },
      layer);
}

void apply_layer(const Layer& layer, Shape in, std::span<const double> x, std::span<double> y) {
  std::visit(Overload{
                 [&](const DenseLayer& d) { kernels::gemv(d.weights, x, y); },
                 [&](const ConvLayer& c) { kernels::conv_forward(c.filter, c.stride, in, x, y); },
             },
             layer);
}

DenseMatrix layer_matrix(const Layer& layer, Shape in) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->weights;
  const auto& c = std::get<ConvLayer>(layer);
  const Shape out = layer_output_shape(layer, in);
  const ConvFilter& f = c.filter;
  DenseMatrix m(out.size(), in.size());
  for (std::size_t o = 0; o < out.channels; ++o)
    for (std::size_t a = 0; a < out.height; ++a)
      for (std::size_t b = 0; b < out.width; ++b) {
        const std::size_t row = (o * out.height + a) * out.width + b;
        for (std::size_t ch = 0; ch < f.in_channels(); ++ch)
          for (std::size_t u = 0; u < f.width(); ++u)
            for (std::size_t v = 0; v < f.width(); ++v) {
              const std::size_t col = (ch * in.height + c.stride * a + u) * in.width + c.stride * b + v;
              m(row, col) = f(o, ch, u, v);
            }
      }
  return m;
}

FeatureMap conv_forward(const ConvFilter& filter, std::size_t stride, const FeatureMap& input) {
  const Layer layer = ConvLayer{filter, stride};
  const Shape out = layer_output_shape(layer, input.shape());
  FeatureMap y(out.channels, out.height, out.width);
  kernels::conv_forward(filter, stride, input.shape(), input.data(), y.data());
  return y;
}

std::size_t layer_param_count(const Layer& layer) {
  return std::visit(Overload{[](const DenseLayer& d) { return d.weights.size(); },
                             [](const ConvLayer& c) { return c.filter.size(); }},
                    layer);
}

double layer_frobenius_norm(const Layer& layer) {
  return std::visit(Overload{[](const DenseLayer& d) { return frobenius_norm(d.weights); },
                             [](const ConvLayer& c) { return frobenius_norm(c.filter); }},
                    layer);
}

void scale_layer(Layer& layer, double factor) {
  std::visit(Overload{[&](DenseLayer& d) { d.weights *= factor; }, [&](ConvLayer& c) { c.filter *= factor; }},
             layer);
}

bool is_conv(const Layer& layer) { return std::holds_alternative<ConvLayer>(layer); }

Network::Network(Shape input_shape, std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  if (input_shape.size() == 0) throw ShapeError("network input shape is empty");
  shapes_.push_back(input_shape);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    try {
      shapes_.push_back(layer_output_shape(layers_[k], shapes_.back()));
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(k + 1) + ": " + e.what());
    }
  }
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += layer_param_count(l);
  return n;
}

bool Network::has_conv() const {
  for (const Layer& l : layers_)
    if (is_conv(l)) return true;
  return false;
}

std::vector<double> Network::forward(std::span<const double> x) const { return propagate(0, depth(), x); }

std::vector<double> Network::propagate(std::size_t i, std::size_t j, std::span<const double> xi) const {
  if (i > j || j > depth()) throw ShapeError("propagate: need 0 <= i <= j <= depth");
  if (xi.size() != shapes_[i].size()) {
    throw ShapeError("propagate: input has " + std::to_string(xi.size()) + " values, layer " + std::to_string(i) +
                     " has shape " + shapes_[i].str());
  }
  std::vector<double> cur(xi.begin(), xi.end());
  for (std::size_t k = i; k < j; ++k) {
    if (k > 0) relu_inplace(cur);
    std::vector<double> next(shapes_[k + 1].size());
    apply_layer(layers_[k], shapes_[k], cur, next);
    cur.swap(next);
  }
  return cur;
}

std::vector<double> ActivationTrace::activated(std::size_t i) const {
  std::vector<double> v = x.at(i);
  if (i > 0) relu_inplace(v);
  return v;
}

void relu_inplace(std::span<double> v) {
  for (double& e : v) e = e > 0.0 ? e : 0.0;
}

ActivationTrace forward_trace(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_shape().size()) {
    throw ShapeError("forward_trace: input has " + std::to_string(x.size()) + " values, expected " +
                     net.input_shape().str());
  }
  ActivationTrace t;
  t.x.emplace_back(x.begin(), x.end());
  t.masks.emplace_back(x.size(), std::uint8_t{1});
  for (std::size_t k = 1; k <= net.depth(); ++k) {
    std::vector<double> in = t.activated(k - 1);
    std::vector<double> out(net.shape(k).size());
    apply_layer(net.layer(k), net.shape(k - 1), in, out);
    std::vector<std::uint8_t> mask(out.size());
    for (std::size_t p = 0; p < out.size(); ++p) mask[p] = out[p] > 0.0;
    t.x.push_back(std::move(out));
    t.masks.push_back(std::move(mask));
  }
  return t;
}

Network rebalance(const Network& net) {
  const std::size_t d = net.depth();
  std::vector<double> norms(d);
  double log_sum = 0.0;
  for (std::size_t i = 1; i <= d; ++i) {
    norms[i - 1] = layer_frobenius_norm(net.layer(i));
    if (norms[i - 1] == 0.0) throw DegenerateError("rebalance: layer " + std::to_string(i) + " is zero");
    log_sum += std::log(norms[i - 1]);
  }
  const double target = std::exp(log_sum / static_cast<double>(d));
  std::vector<Layer> layers = net.layers();
  for (std::size_t k = 0; k < d; ++k) scale_layer(layers[k], target / norms[k]);
  return Network(net.input_shape(), std::move(layers));
}

}  // namespace nscomp
