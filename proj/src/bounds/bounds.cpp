#include "nscomp/bounds/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nscomp/compressors/conv.hpp"
#include "nscomp/compressors/matrix.hpp"
#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0)) throw UsageError("gamma must be positive");
}

void check_cushions(const StabilityConstants& s, std::size_t depth) {
  if (s.mu.size() != depth || s.mu_to.size() != depth) throw ShapeError("stability constants do not match the depth");
  for (std::size_t i = 0; i < depth; ++i) {
    if (!(s.mu[i] > 0.0) || !(s.mu_to[i] > 0.0)) {
      throw DegenerateError("layer " + std::to_string(i + 1) + " has a zero cushion");
    }
  }
}

double beta_of(const StabilityConstants& s, std::size_t i) { return i < s.beta.size() ? s.beta[i] : 1.0; }

// Per-layer norms of the (unrolled) layer matrix.
struct LayerNorms {
  double spectral = 0.0;
  double frobenius = 0.0;
  double l1inf = 0.0;  // max row l1
  double l12 = 0.0;    // sum of column l2
  double h = 0.0;      // larger side
};

LayerNorms norms_of(const Layer& layer, Shape in) {
  const DenseMatrix a = layer_matrix(layer, in);
  LayerNorms n;
  n.frobenius = frobenius_norm(a);
  n.spectral = layer_spectral_norm(layer, in);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double row = 0.0;
    for (double v : a.row(r)) row += std::abs(v);
    n.l1inf = std::max(n.l1inf, row);
  }
  std::vector<double> col(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) col[c] += a(r, c) * a(r, c);
  for (double c : col) n.l12 += std::sqrt(c);
  n.h = static_cast<double>(std::max(a.rows(), a.cols()));
  return n;
}

}  // namespace

std::vector<double> margins(const Predictor& f, const Dataset& data) {
  data.validate();
  std::vector<double> out(data.size());
  kernels::parallel_for(data.size(), [&](std::size_t s) {
    const std::vector<double> y = f(data.inputs[s]);
    const std::size_t label = data.labels[s];
    if (label >= y.size()) throw ShapeError("margins: label exceeds the output dimension");
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < y.size(); ++j)
      if (j != label) other = std::max(other, y[j]);
    out[s] = y[label] - other;
  });
  return out;
}

std::vector<double> margins(const Network& net, const Dataset& data) {
  return margins([&net](std::span<const double> x) { return net.forward(x); }, data);
}

double margin_loss_from(std::span<const double> m, double gamma) {
  if (!(gamma >= 0.0)) throw UsageError("margin_loss: gamma must be non-negative");
  if (m.empty()) throw UsageError("margin_loss: empty data");
  std::size_t bad = 0;
  for (double v : m) bad += v <= gamma;
  return static_cast<double>(bad) / static_cast<double>(m.size());
}

MarginLoss margin_loss(const Predictor& f, const Dataset& data, double gamma) {
  if (!(gamma >= 0.0)) throw UsageError("margin_loss: gamma must be non-negative");
  MarginLoss r;
  r.margins = margins(f, data);
  r.loss = margin_loss_from(r.margins, gamma);
  return r;
}

MarginLoss margin_loss(const Network& net, const Dataset& data, double gamma) {
  return margin_loss([&net](std::span<const double> x) { return net.forward(x); }, data, gamma);
}

double penalty(double q, double r, double m) {
  if (q < 0.0 || r < 1.0 || m < 1.0) throw UsageError("penalty: need q >= 0, r >= 1, m >= 1");
  return std::sqrt(q * std::log(r) / m);
}

double penalty_with_outliers(double q, double r, double m, double zeta) {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw UsageError("penalty: zeta must lie in [0, 1]");
  return zeta + penalty(q, r, m);
}

double epsilon_from_margin(double gamma, double max_output_norm) {
  check_gamma(gamma);
  if (!(max_output_norm > 0.0)) throw DegenerateError("every network output is zero");
  return gamma / (std::numbers::sqrt2 * max_output_norm);
}

double q_fc(const StabilityConstants& s, std::size_t depth, std::size_t h, std::size_t m, double delta, double eps) {
  return fc_target_params(s, eps, delta, m, depth, h);
}

double q_conv(const StabilityConstants& s, std::span<const std::size_t> strides, std::span<const std::size_t> widths,
              std::size_t depth, double eps) {
  check_cushions(s, depth);
  if (strides.size() != depth || widths.size() != depth) throw ShapeError("q_conv: geometry does not match the depth");
  if (!(eps > 0.0)) throw UsageError("q_conv: eps must be positive");
  const double d = static_cast<double>(depth);
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    const double ks = std::ceil(static_cast<double>(widths[i]) / static_cast<double>(strides[i]));
    const double beta = beta_of(s, i);
    sum += beta * beta * ks * ks / (s.mu[i] * s.mu[i] * s.mu_to[i] * s.mu_to[i]);
  }
  return s.c * s.c * d * d / (eps * eps) * sum;
}

double LayerGeometry::ratio_sq(std::size_t layer) const {
  const double ks = std::ceil(static_cast<double>(widths.at(layer)) / static_cast<double>(strides.at(layer)));
  return ks * ks;
}

LayerGeometry geometry_of(const Network& net) {
  LayerGeometry g;
  for (const Layer& l : net.layers()) {
    if (const auto* c = std::get_if<ConvLayer>(&l)) {
      g.widths.push_back(c->filter.width());
      g.strides.push_back(c->stride);
    } else {
      g.widths.push_back(1);
      g.strides.push_back(1);
    }
    g.params.push_back(layer_param_count(l));
  }
  return g;
}

namespace {

double capacity_sum(const CapacityInputs& in, const LayerGeometry& geo, bool with_c) {
  const std::size_t d = geo.widths.size();
  check_cushions(in.constants, d);
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double beta = beta_of(in.constants, i);
    const double ci = with_c && i < in.c_layer.size() ? in.c_layer[i] : 1.0;
    sum += beta * beta * ci * ci * geo.ratio_sq(i) /
           (in.constants.mu[i] * in.constants.mu[i] * in.constants.mu_to[i] * in.constants.mu_to[i]);
  }
  return sum;
}

}  // namespace

OursBound bound_ours(const CapacityInputs& in, const LayerGeometry& geo, double max_output_norm, double gamma,
                     std::size_t m) {
  check_gamma(gamma);
  if (m == 0) throw UsageError("bound_ours: m must be positive");
  const double f2 = max_output_norm * max_output_norm / (gamma * gamma);
  const double d = static_cast<double>(geo.widths.size());
  OursBound b;
  b.capacity = f2 * capacity_sum(in, geo, true);
  b.closed_form = std::sqrt(in.constants.c * in.constants.c * d * d * f2 * capacity_sum(in, geo, false) /
                        static_cast<double>(m));
  return b;
}

double layer_spectral_norm(const Layer& layer, Shape in) {
  const DenseMatrix a = layer_matrix(layer, in);
  if (a.rows() <= kSvdMaxDim && a.cols() <= kSvdMaxDim) return svd(a).singular.front();
  SpectralNormOptions o;
  o.tol = 1e-10;
  return spectral_norm(a, o);
}

Baselines bound_baselines(const Network& net, double gamma) {
  check_gamma(gamma);
  std::vector<LayerNorms> norms(net.depth());
  for (std::size_t i = 1; i <= net.depth(); ++i) norms[i - 1] = norms_of(net.layer(i), net.shape(i - 1));
  double l1inf = 1.0, fro = 1.0, spec = 1.0, sum_l12 = 0.0, sum_fro = 0.0;
  for (const LayerNorms& n : norms) {
    if (n.spectral == 0.0) throw DegenerateError("bound_baselines: a layer is zero");
    l1inf *= n.l1inf;
    fro *= n.frobenius * n.frobenius;
    spec *= n.spectral * n.spectral;
    sum_l12 += n.l12 * n.l12 / (n.spectral * n.spectral);
    sum_fro += n.h * n.frobenius * n.frobenius / (n.spectral * n.spectral);
  }
  const double g2 = gamma * gamma;
  return {l1inf / g2, fro / g2, spec * sum_l12 / g2, spec * sum_fro / g2};
}

double bound_specfro_closed_form(const Network& net, double max_input_norm, double gamma, std::size_t m) {
  check_gamma(gamma);
  if (net.has_conv()) throw UsageError("bound_specfro_closed_form: dense networks only");
  if (m == 0) throw UsageError("bound_specfro_closed_form: m must be positive");
  double h = 0.0, spec = 1.0, sum = 0.0;
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    const LayerNorms n = norms_of(net.layer(i), net.shape(i - 1));
    if (n.spectral == 0.0) throw DegenerateError("bound_specfro_closed_form: a layer is zero");
    h = std::max(h, n.h);
    spec *= n.spectral * n.spectral;
    sum += n.frobenius * n.frobenius / (n.spectral * n.spectral);
  }
  const double d = static_cast<double>(net.depth());
  return std::sqrt(h * d * d * max_input_norm * spec * sum / (gamma * gamma * static_cast<double>(m)));
}

std::vector<EffectiveRow> per_layer_effective(const CapacityInputs& in, const LayerGeometry& geo) {
  const std::size_t d = geo.widths.size();
  check_cushions(in.constants, d);
  std::vector<EffectiveRow> rows;
  for (std::size_t i = 0; i < d; ++i) {
    EffectiveRow r;
    r.layer = i + 1;
    const double beta = beta_of(in.constants, i);
    const double ci = i < in.c_layer.size() ? in.c_layer[i] : 1.0;
    r.effective = ci * ci * beta * beta * geo.ratio_sq(i) /
                  (in.constants.mu[i] * in.constants.mu[i] * in.constants.mu_to[i] * in.constants.mu_to[i]);
    r.actual = geo.params.at(i);
    r.percent = r.actual > 0 ? 100.0 * r.effective / static_cast<double>(r.actual) : 0.0;
    rows.push_back(r);
  }
  return rows;
}

LipschitzGap lipschitz_gap(const Network& a, const Network& a_hat, std::span<const double> x) {
  if (a.depth() != a_hat.depth() || a.input_shape() != a_hat.input_shape()) {
    throw ShapeError("lipschitz_gap: networks have different architectures");
  }
  const double d = static_cast<double>(a.depth());
  LipschitzGap g;
  double prod = 1.0, sum = 0.0;
  for (std::size_t i = 1; i <= a.depth(); ++i) {
    const Shape in = a.shape(i - 1);
    if (a_hat.shape(i) != a.shape(i)) throw ShapeError("lipschitz_gap: layer shapes differ");
    const double s = layer_spectral_norm(a.layer(i), in);
    if (s == 0.0) throw DegenerateError("lipschitz_gap: a layer is zero");
    const DenseMatrix diff = layer_matrix(a.layer(i), in) - layer_matrix(a_hat.layer(i), in);
    const double ds = diff.rows() <= kSvdMaxDim && diff.cols() <= kSvdMaxDim
                          ? svd(diff).singular.front()
                          : spectral_norm(diff);
    if (ds > s / d) g.precondition = false;
    prod *= s;
    sum += ds / s;
  }
  g.bound = std::numbers::e * norm2(x) * prod * sum;
  const std::vector<double> fa = a.forward(x), fb = a_hat.forward(x);
  double gap = 0.0;
  for (std::size_t p = 0; p < fa.size(); ++p) gap += (fa[p] - fb[p]) * (fa[p] - fb[p]);
  g.gap = std::sqrt(gap);
  return g;
}

BoundReport make_bound_report(const Network& net, const Dataset& data, const CapacityInputs& in, double gamma,
                              const BoundOptions& options) {
  check_gamma(gamma);
  BoundReport rep;
  rep.gamma = gamma;
  const MarginLoss ml = margin_loss(net, data, gamma);
  rep.margin_loss = ml.loss;
  double max_in = 0.0;
  for (const auto& x : data.inputs) {
    rep.max_output_norm = std::max(rep.max_output_norm, norm2(net.forward(x)));
    max_in = std::max(max_in, norm2(x));
  }
  rep.epsilon = std::min(1.0, epsilon_from_margin(gamma, rep.max_output_norm));
  const LayerGeometry geo = geometry_of(net);
  const std::size_t d = net.depth();
  std::size_t h = 0;
  for (std::size_t i = 0; i <= d; ++i) h = std::max(h, net.shape(i).size());
  const std::size_t m = data.size();

  rep.q_fc = q_fc(in.constants, d, h, m, options.delta, rep.epsilon);
  rep.q_conv = q_conv(in.constants, geo.strides, geo.widths, d, rep.epsilon);

  rep.levels = options.levels;
  if (rep.levels <= 0.0) {
    // Level count of the projection schedule at the same eps, delta.
    const double eta = network_eta(net, options.delta, m);
    const std::vector<double> eps_i = per_layer_eps(in.constants, rep.epsilon, d, 6.0, net.has_conv());
    rep.levels = 1.0;
    for (std::size_t i = 1; i <= d; ++i) {
      const double e = std::min(1.0, eps_i[i - 1]);
      std::size_t r = 1;
      if (const auto* c = std::get_if<ConvLayer>(&net.layer(i))) {
        const std::size_t k = conv_project_k(e, eta, c->filter.width(), c->stride, 4.0);
        const std::size_t rank = std::min(k * conv_project_p(eta), c->filter.size());
        r = conv_project_levels(c->filter.size(), rank, e, k);
      } else {
        r = matrix_project_levels(std::get<DenseLayer>(net.layer(i)).weights, e, matrix_project_k(e, eta));
      }
      rep.levels = std::max(rep.levels, static_cast<double>(r));
    }
  }
  const double q = net.has_conv() ? rep.q_conv : rep.q_fc;
  rep.penalty = penalty_with_outliers(q, rep.levels, static_cast<double>(m), options.zeta);
  rep.ours = bound_ours(in, geo, rep.max_output_norm, gamma, m);
  rep.baselines = bound_baselines(net, gamma);
  rep.specfro_closed_form =
      net.has_conv() ? std::numeric_limits<double>::quiet_NaN() : bound_specfro_closed_form(net, max_in, gamma, m);
  rep.per_layer = per_layer_effective(in, geo);
  if (!net.has_conv()) {
    rep.notes.push_back("fully connected bound evaluated through the conv form with beta = 1 and ceil(kappa/s) = 1");
  }
  rep.notes.push_back("||A||_{1,inf}: max row l1 norm; ||A||_{1,2}: sum of column l2 norms; conv layers unrolled");
  rep.notes.push_back("depth polynomials, log factors and universal constants dropped from capacity values");
  return rep;
}

}  // namespace nscomp
