#include "nscomp/netlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

void Dataset::validate() const {
  if (inputs.empty()) throw ShapeError("dataset is empty");
  if (labels.size() != inputs.size()) throw ShapeError("dataset has different numbers of inputs and labels");
  if (classes == 0) throw ShapeError("dataset declares zero classes");
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    if (inputs[r].size() != input_shape.size()) {
      throw ShapeError("record " + std::to_string(r) + ": expected " + std::to_string(input_shape.size()) +
                       " values, got " + std::to_string(inputs[r].size()));
    }
    if (labels[r] >= classes) {
      throw ShapeError("record " + std::to_string(r) + ": label " + std::to_string(labels[r]) +
                       " out of range 0.." + std::to_string(classes - 1));
    }
  }
}

Network init_network(Shape input_shape, const std::vector<LayerSpec>& arch, RngStream stream) {
  std::vector<Layer> layers;
  Shape cur = input_shape;
  for (std::size_t k = 0; k < arch.size(); ++k) {
    const LayerSpec& spec = arch[k];
    RngStream s = stream.derive(k);
    Layer layer;
    if (spec.kind == LayerSpec::Kind::Dense) {
      DenseMatrix w = sample_gaussian(s, spec.outputs, cur.size());
      w *= std::sqrt(2.0 / static_cast<double>(cur.size()));
      layer = DenseLayer{std::move(w)};
    } else {
      ConvFilter f = sample_gaussian(s, spec.outputs, cur.channels, spec.width);
      f *= std::sqrt(2.0 / static_cast<double>(cur.channels * spec.width * spec.width));
      layer = ConvLayer{std::move(f), spec.stride};
    }
    cur = layer_output_shape(layer, cur);
    layers.push_back(std::move(layer));
  }
  return Network(input_shape, std::move(layers));
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double accuracy(const Network& net, const Dataset& data) {
  std::vector<std::uint8_t> hit(data.size());
  kernels::parallel_for(data.size(), [&](std::size_t r) { hit[r] = argmax(net.forward(data.inputs[r])) == data.labels[r]; });
  return static_cast<double>(std::accumulate(hit.begin(), hit.end(), std::size_t{0})) /
         static_cast<double>(data.size());
}

std::vector<std::size_t> permutation(std::size_t n, const RngStream& stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.uniform(i) * static_cast<double>(i));
    std::swap(p[i - 1], p[std::min(j, i - 1)]);
  }
  return p;
}

namespace {

// Gradient buffers with the same layout as the layer parameters.
using Grads = std::vector<std::vector<double>>;

std::span<double> params(Layer& layer) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) return d->weights.data();
  return std::get<ConvLayer>(layer).filter.data();
}

// Accumulates d loss / d params for one sample into `grads`; returns the loss.
double backprop(const Network& net, const std::vector<double>& x, std::uint32_t label, Grads& grads) {
  const ActivationTrace t = forward_trace(net, x);
  const std::size_t d = net.depth();
  const std::vector<double>& logits = t.x[d];
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> delta(logits.size());
  double z = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) z += std::exp(logits[c] - mx);
  for (std::size_t c = 0; c < logits.size(); ++c) delta[c] = std::exp(logits[c] - mx) / z;
  const double loss = -(logits[label] - mx - std::log(z));
  delta[label] -= 1.0;

  for (std::size_t k = d; k >= 1; --k) {
    const std::vector<double> in = t.activated(k - 1);
    const Shape in_shape = net.shape(k - 1);
    std::vector<double> back(in.size(), 0.0);
    std::vector<double>& g = grads[k - 1];
    if (const auto* dl = std::get_if<DenseLayer>(&net.layer(k))) {
      const DenseMatrix& w = dl->weights;
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double dr = delta[r];
        if (dr == 0.0) continue;
        double* gr = g.data() + r * w.cols();
        for (std::size_t c = 0; c < w.cols(); ++c) {
          gr[c] += dr * in[c];
          back[c] += w(r, c) * dr;
        }
      }
    } else {
      const auto& cl = std::get<ConvLayer>(net.layer(k));
      const ConvFilter& f = cl.filter;
      const Shape out = net.shape(k);
      const std::size_t kw = f.width(), s = cl.stride;
      for (std::size_t o = 0; o < out.channels; ++o)
        for (std::size_t a = 0; a < out.height; ++a)
          for (std::size_t b = 0; b < out.width; ++b) {
            const double dv = delta[(o * out.height + a) * out.width + b];
            if (dv == 0.0) continue;
            for (std::size_t c = 0; c < f.in_channels(); ++c)
              for (std::size_t u = 0; u < kw; ++u)
                for (std::size_t v = 0; v < kw; ++v) {
                  const std::size_t idx = (c * in_shape.height + s * a + u) * in_shape.width + s * b + v;
                  g[((o * f.in_channels() + c) * kw + u) * kw + v] += dv * in[idx];
                  back[idx] += f(o, c, u, v) * dv;
                }
          }
    }
    if (k == 1) break;
    const auto& mask = t.masks[k - 1];
    for (std::size_t p = 0; p < back.size(); ++p) back[p] = mask[p] ? back[p] : 0.0;
    delta.swap(back);
  }
  return loss;
}

}  // namespace

TrainResult train_sgd(Network init, const Dataset& data, const TrainConfig& config, const Dataset* validation) {
  data.validate();
  if (init.input_shape() != data.input_shape) throw ShapeError("train_sgd: dataset shape does not match network input");
  if (init.shape(init.depth()).size() != data.classes) {
    throw ShapeError("train_sgd: network has " + std::to_string(init.shape(init.depth()).size()) +
                     " outputs for " + std::to_string(data.classes) + " classes");
  }
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  Network net = std::move(init);
  const std::size_t d = net.depth();
  Grads velocity(d), grads(d);
  for (std::size_t k = 0; k < d; ++k) {
    velocity[k].assign(layer_param_count(net.layer(k + 1)), 0.0);
    grads[k].assign(velocity[k].size(), 0.0);
  }
  const RngStream shuffle(config.seed, 0x7261696E);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = permutation(data.size(), shuffle.derive(epoch));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        epoch_loss += backprop(net, data.inputs[order[b]], data.labels[order[b]], grads);
      }
      const double scale = config.lr / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < d; ++k) {
        std::span<double> w = params(net.mutable_layer(k + 1));
        for (std::size_t p = 0; p < w.size(); ++p) {
          velocity[k][p] = config.momentum * velocity[k][p] - scale * grads[k][p];
          w[p] += velocity[k][p];
        }
      }
    }
    epoch_loss /= static_cast<double>(data.size());
    bool finite = std::isfinite(epoch_loss);
    for (std::size_t k = 1; k <= d && finite; ++k) finite = all_finite(params(net.mutable_layer(k)));
    if (!finite) {
      throw TrainingError("training diverged: loss is not finite at epoch " + std::to_string(epoch), epoch);
    }
    result.log.loss.push_back(epoch_loss);
    result.log.train_accuracy.push_back(accuracy(net, data));
    if (validation != nullptr) result.log.validation_accuracy.push_back(accuracy(net, *validation));
  }
  result.net = std::move(net);
  return result;
}

}  // namespace nscomp
