#include "nscomp/compressors/network.hpp"

#include <algorithm>
#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

std::size_t CompressedNetwork::total_params() const {
  std::size_t q = 0;
  for (const auto& l : layers) q += l.param_count;
  return q;
}

std::size_t CompressedNetwork::max_levels() const {
  std::size_t r = 1;
  for (const auto& l : layers) r = std::max(r, l.quantization_levels);
  return r;
}

std::vector<double> CompressedNetwork::forward(std::span<const double> x) const {
  const Network& shape = original_shape;
  if (x.size() != shape.input_shape().size()) throw ShapeError("compressed forward: input size mismatch");
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (k > 0) relu_inplace(cur);
    std::vector<double> next(shape.shape(k + 1).size());
    const CompressedLayer& l = layers[k];
    if (!l.local_filters.empty()) {
      kernels::conv_forward_local(l.local_filters, std::get<ConvLayer>(l.weights).stride, shape.shape(k), cur, next);
    } else {
      apply_layer(l.weights, shape.shape(k), cur, next);
    }
    cur.swap(next);
  }
  return cur;
}

Network CompressedNetwork::shared_network() const {
  std::vector<Layer> ls;
  for (const auto& l : layers) ls.push_back(l.weights);
  return Network(original_shape.input_shape(), std::move(ls));
}

namespace {

std::size_t widest(const Network& net) {
  std::size_t h = 0;
  for (std::size_t i = 0; i <= net.depth(); ++i) h = std::max(h, net.shape(i).size());
  return h;
}

void check_constants(const StabilityConstants& s, std::size_t depth) {
  if (s.mu.size() != depth || s.mu_to.size() != depth) {
    throw ShapeError("stability constants do not match the network depth");
  }
  for (std::size_t i = 0; i < depth; ++i) {
    if (!(s.mu[i] > 0.0) || !(s.mu_to[i] > 0.0)) {
      throw DegenerateError("layer " + std::to_string(i + 1) + " has a zero cushion");
    }
  }
  if (!(s.c >= 1.0) || !std::isfinite(s.c)) throw DegenerateError("activation contraction must be finite and >= 1");
}

void check_eps_delta(double eps, double delta) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError("eps must lie in (0, 1]");
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("delta must lie in (0, 1]");
}

}  // namespace

double network_eta(const Network& net, double delta, std::size_t m) {
  const double d = static_cast<double>(net.depth());
  const double h = static_cast<double>(widest(net));
  return delta / (6.0 * d * d * h * h * static_cast<double>(std::max<std::size_t>(m, 1)));
}

std::vector<double> per_layer_eps(const StabilityConstants& s, double eps, std::size_t depth, double denominator,
                                  bool use_beta) {
  check_constants(s, depth);
  std::vector<double> out(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const double beta = use_beta && i < s.beta.size() ? std::max(1.0, s.beta[i]) : 1.0;
    out[i] = eps * s.mu[i] * s.mu_to[i] / (denominator * s.c * static_cast<double>(depth) * beta);
  }
  return out;
}

double fc_target_params(const StabilityConstants& s, double eps, double delta, std::size_t m, std::size_t depth,
                        std::size_t h) {
  check_constants(s, depth);
  const double d = static_cast<double>(depth);
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) sum += 1.0 / (s.mu[i] * s.mu[i] * s.mu_to[i] * s.mu_to[i]);
  return 72.0 * s.c * s.c * d * d * std::log(static_cast<double>(m) * d * static_cast<double>(h) / delta) /
         (eps * eps) * sum;
}

CompressedNetwork compress_network_fc(const Network& net, const StabilityConstants& s, double eps, double delta,
                                      std::size_t m, const HelperString& helper, const CompressOptions& options) {
  check_eps_delta(eps, delta);
  if (net.has_conv()) throw UsageError("compress_network_fc: network has conv layers; use the conv scheme");
  CompressedNetwork out;
  out.original_shape = net;
  out.scheme = Scheme::MatrixProject;
  out.epsilon = eps;
  out.eta = options.eta_override > 0.0 ? options.eta_override : network_eta(net, delta, m);
  out.per_layer_eps = per_layer_eps(s, eps, net.depth(), options.denominator, false);
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    MatrixProjectOptions mo = options.dense;
    mo.layer_index = i;
    out.layers.push_back(matrix_project(std::get<DenseLayer>(net.layer(i)).weights,
                                        std::min(1.0, out.per_layer_eps[i - 1]), out.eta, helper, mo));
  }
  return out;
}

CompressedNetwork compress_network_conv(const Network& net, const StabilityConstants& s, double eps, double delta,
                                        std::size_t m, const HelperString& helper, const CompressOptions& options) {
  check_eps_delta(eps, delta);
  CompressedNetwork out;
  out.original_shape = net;
  out.scheme = Scheme::ConvPwiseProject;
  out.epsilon = eps;
  out.eta = options.eta_override > 0.0 ? options.eta_override : network_eta(net, delta, m);
  out.per_layer_eps = per_layer_eps(s, eps, net.depth(), options.denominator, true);
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    const double eps_i = std::min(1.0, out.per_layer_eps[i - 1]);
    if (const auto* c = std::get_if<ConvLayer>(&net.layer(i))) {
      ConvProjectOptions co = options.conv;
      co.layer_index = i;
      co.clamp_to_full_space = true;
      const Shape o = net.shape(i);
      out.layers.push_back(conv_project_pwise(c->filter, eps_i, out.eta, c->stride, o.height, o.width,
                                              HelperString{helper.master_seed, Scheme::ConvPwiseProject}, co));
    } else {
      MatrixProjectOptions mo = options.dense;
      mo.layer_index = i;
      out.layers.push_back(matrix_project(std::get<DenseLayer>(net.layer(i)).weights, eps_i, out.eta,
                                          HelperString{helper.master_seed, Scheme::MatrixProject}, mo));
    }
  }
  return out;
}

SvdCompressResult compress_network_svd(const Network& net, double gamma, std::span<const std::vector<double>> inputs,
                                       const SvdCompressOptions& options) {
  if (!(gamma > 0.0)) throw UsageError("compress_network_svd: gamma must be positive");
  if (net.has_conv()) throw UsageError("compress_network_svd: dense networks only");
  if (inputs.empty()) throw UsageError("compress_network_svd: need at least one input");
  double prod = 1.0;
  std::vector<double> spectral(net.depth());
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    spectral[i - 1] = svd(std::get<DenseLayer>(net.layer(i)).weights).singular[0];
    prod *= spectral[i - 1];
  }
  if (!(prod > 0.0)) throw DegenerateError("compress_network_svd: product of spectral norms is zero");
  double xmax = 0.0;
  for (const auto& x : inputs) xmax = std::max(xmax, norm2(x));
  if (xmax == 0.0) throw DegenerateError("compress_network_svd: all inputs are zero");

  SvdCompressResult res;
  CompressedNetwork& out = res.net;
  out.original_shape = net;
  out.scheme = Scheme::SvdTruncate;
  out.svd_delta = std::min(1.0, gamma / (options.constant * xmax * static_cast<double>(net.depth()) * prod));
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    const DenseMatrix& a = std::get<DenseLayer>(net.layer(i)).weights;
    const SvdTruncation t = svd_truncate(a, out.svd_delta);
    CompressedLayer l;
    l.scheme = Scheme::SvdTruncate;
    l.layer_index = i;
    l.k = t.rank;
    std::vector<double> params(t.left.values());
    params.insert(params.end(), t.right.values().begin(), t.right.values().end());
    l.param_count = params.size();
    l.discrete_params = params;
    l.weights = DenseLayer{t.product()};
    // Level count if the factors were rounded to ||A||_F / h^2.
    const double h = static_cast<double>(std::max(a.rows(), a.cols()));
    l.grid = frobenius_norm(a) / (h * h);
    if (!params.empty()) l.quantization_levels = quantize_params(params, l.grid).levels;
    out.layers.push_back(std::move(l));
  }
  for (const auto& x : inputs) {
    const std::vector<double> fa = net.forward(x), fb = out.forward(x);
    double gap = 0.0;
    for (std::size_t p = 0; p < fa.size(); ++p) gap += (fa[p] - fb[p]) * (fa[p] - fb[p]);
    res.max_gap = std::max(res.max_gap, std::sqrt(gap));
  }
  res.within_gamma = res.max_gap <= gamma;
  return res;
}

double max_relative_distortion(const Network& net, const CompressedNetwork& g,
                               std::span<const std::vector<double>> inputs) {
  std::vector<double> rel(inputs.size());
  kernels::parallel_for(inputs.size(), [&](std::size_t r) {
    const std::vector<double> fa = net.forward(inputs[r]), fb = g.forward(inputs[r]);
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < fa.size(); ++p) {
      num += (fa[p] - fb[p]) * (fa[p] - fb[p]);
      den += fa[p] * fa[p];
    }
    rel[r] = den > 0.0 ? std::sqrt(num / den) : (num > 0.0 ? INFINITY : 0.0);
  });
  return rel.empty() ? 0.0 : *std::max_element(rel.begin(), rel.end());
}

}  // namespace nscomp
