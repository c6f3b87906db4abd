#include "nscomp/stability/stability.hpp"

#include <algorithm>
#include <cmath>

#include "nscomp/compressors/conv.hpp"
#include "nscomp/compressors/matrix.hpp"
#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/netlab/jacobian.hpp"
#include "nscomp/netlab/noise.hpp"

namespace nscomp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_norm(std::span<const double> v) { return dot(v, v); }

void require_samples(Samples samples, const Network& net) {
  if (samples.empty()) throw UsageError("stability: sample set is empty");
  for (const auto& x : samples) {
    if (x.size() != net.input_shape().size()) throw ShapeError("stability: sample does not match the input shape");
  }
}

std::vector<ActivationTrace> traces_of(const Network& net, Samples samples) {
  std::vector<ActivationTrace> out(samples.size());
  kernels::parallel_for(samples.size(), [&](std::size_t s) { out[s] = forward_trace(net, samples[s]); });
  return out;
}

std::vector<double> apply(const Network& net, std::size_t k, std::span<const double> v) {
  std::vector<double> y(net.shape(k).size());
  apply_layer(net.layer(k), net.shape(k - 1), v, y);
  return y;
}

// Squared column norms of J^{i,j} for every j in (i, d], gathered by pixel of x^i:
// pixel2[j - i - 1][pixel]. The sum over pixels is ||J^{i,j}||_F^2.
std::vector<std::vector<double>> column_sweep(const Network& net, const ActivationTrace& trace, std::size_t i) {
  const Shape in = net.shape(i);
  const std::size_t d = net.depth();
  const std::size_t cols = in.size();
  std::vector<std::vector<double>> per_col(cols);
  kernels::parallel_for(cols, [&](std::size_t c) {
    std::vector<double>& rec = per_col[c];
    rec.assign(d - i, 0.0);
    if (!trace.masks[i][c]) return;
    std::vector<double> v(cols, 0.0);
    v[c] = 1.0;
    for (std::size_t k = i + 1; k <= d; ++k) {
      if (k > i + 1) {
        const auto& mask = trace.masks[k - 1];
        for (std::size_t p = 0; p < v.size(); ++p)
          if (!mask[p]) v[p] = 0.0;
      }
      v = apply(net, k, v);
      rec[k - i - 1] = sq_norm(v);
    }
  });
  std::vector<std::vector<double>> pixel2(d - i, std::vector<double>(in.pixels(), 0.0));
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t j = 0; j < d - i; ++j) pixel2[j][c % in.pixels()] += per_col[c][j];
  return pixel2;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double cushion_scale(const Shape& s, bool conv) { return conv ? 1.0 / std::sqrt(static_cast<double>(s.pixels())) : 1.0; }

double width_for_cushion(const Shape& s, bool conv) { return static_cast<double>(conv ? s.channels : s.size()); }

std::vector<std::size_t> spread_indices(std::size_t n, std::size_t cap) {
  const std::size_t m = cap == 0 ? n : std::min(n, cap);
  std::vector<std::size_t> idx(m);
  for (std::size_t k = 0; k < m; ++k) idx[k] = k * n / m;
  return idx;
}

}  // namespace

NoiseSensitivity noise_sensitivity(const VectorMap& m, std::span<const double> x, std::size_t trials,
                                   RngStream stream) {
  if (trials < 2) throw UsageError("noise_sensitivity: need at least 2 trials");
  const std::vector<double> mx = m(x);
  const double mx2 = sq_norm(mx);
  if (mx2 == 0.0) throw DegenerateError("noise_sensitivity: M(x) is zero");
  const double xn = norm2(x);
  std::vector<double> ratio(trials);
  kernels::parallel_for(trials, [&](std::size_t t) {
    const RngStream g = stream.derive(t);
    std::vector<double> xp(x.begin(), x.end());
    for (std::size_t p = 0; p < xp.size(); ++p) xp[p] += g.normal(p) * xn;
    const std::vector<double> y = m(xp);
    double diff = 0.0;
    for (std::size_t p = 0; p < y.size(); ++p) diff += (y[p] - mx[p]) * (y[p] - mx[p]);
    ratio[t] = diff / mx2;
  });
  const double mean = sum(ratio) / static_cast<double>(trials);
  double var = 0.0;
  for (double r : ratio) var += (r - mean) * (r - mean);
  var /= static_cast<double>(trials - 1);
  return {mean, std::sqrt(var / static_cast<double>(trials))};
}

NoiseSensitivity noise_sensitivity(const DenseMatrix& m, std::span<const double> x, std::size_t trials,
                                   RngStream stream) {
  return noise_sensitivity([&m](std::span<const double> v) { return matvec(m, v); }, x, trials, stream);
}

double robust_extremum(std::span<const double> values, double zeta, bool lower) {
  if (!(zeta >= 0.0 && zeta < 1.0)) throw UsageError("zeta must lie in [0, 1)");
  std::vector<double> valid;
  for (double v : values)
    if (!std::isnan(v)) valid.push_back(v);
  if (valid.empty()) throw DegenerateError("every sample was excluded");
  const std::size_t excluded = values.size() - valid.size();
  const auto budget = static_cast<std::size_t>(std::floor(zeta * static_cast<double>(values.size())));
  const std::size_t skip = std::min(budget > excluded ? budget - excluded : 0, valid.size() - 1);
  if (lower) {
    std::sort(valid.begin(), valid.end());
  } else {
    std::sort(valid.begin(), valid.end(), std::greater<>());
  }
  return valid[skip];
}

double lower_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("lower_quantile: no values");
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size())));
  return values[std::min(idx, values.size() - 1)];
}

std::vector<std::vector<double>> layer_cushion_samples(const Network& net, Samples samples) {
  require_samples(samples, net);
  const std::size_t d = net.depth();
  std::vector<double> fro(d);
  for (std::size_t i = 1; i <= d; ++i) {
    fro[i - 1] = layer_frobenius_norm(net.layer(i));
    if (fro[i - 1] == 0.0) throw DegenerateError("layer_cushion: layer " + std::to_string(i) + " is zero");
  }
  std::vector<std::vector<double>> out(d, std::vector<double>(samples.size()));
  kernels::parallel_for(samples.size(), [&](std::size_t s) {
    const ActivationTrace t = forward_trace(net, samples[s]);
    for (std::size_t i = 1; i <= d; ++i) {
      const double in = norm2(t.activated(i - 1));
      out[i - 1][s] = in == 0.0 ? kNaN : norm2(t.x[i]) / (fro[i - 1] * in);
    }
  });
  return out;
}

std::vector<double> layer_cushion(const Network& net, Samples samples, double zeta) {
  const auto per = layer_cushion_samples(net, samples);
  std::vector<double> mu;
  for (const auto& v : per) mu.push_back(robust_extremum(v, zeta, true));
  return mu;
}

std::vector<double> interlayer_cushion_samples(const Network& net, Samples samples, std::size_t i, std::size_t j,
                                               bool conv) {
  require_samples(samples, net);
  if (i > j || j > net.depth()) throw UsageError("interlayer_cushion: need i <= j <= depth");
  std::vector<double> out(samples.size());
  const Shape si = net.shape(i);
  if (i == j) {
    std::fill(out.begin(), out.end(), 1.0 / std::sqrt(width_for_cushion(si, conv)));
    return out;
  }
  kernels::parallel_for(samples.size(), [&](std::size_t s) {
    const ActivationTrace t = forward_trace(net, samples[s]);
    const double xi = norm2(t.x[i]);
    const double fro = std::sqrt(sum(column_sweep(net, t, i)[j - i - 1]));
    out[s] = (xi == 0.0 || fro == 0.0) ? kNaN : norm2(t.x[j]) / (cushion_scale(si, conv) * fro * xi);
  });
  return out;
}

double interlayer_cushion(const Network& net, Samples samples, std::size_t i, std::size_t j, bool conv, double zeta) {
  return robust_extremum(interlayer_cushion_samples(net, samples, i, j, conv), zeta, true);
}

std::vector<std::vector<double>> activation_contraction_samples(const Network& net, Samples samples) {
  require_samples(samples, net);
  const std::size_t d = net.depth();
  std::vector<std::vector<double>> out(d > 0 ? d - 1 : 0, std::vector<double>(samples.size()));
  kernels::parallel_for(samples.size(), [&](std::size_t s) {
    const ActivationTrace t = forward_trace(net, samples[s]);
    for (std::size_t i = 1; i < d; ++i) {
      const double act = norm2(t.activated(i));
      out[i - 1][s] = act == 0.0 ? kNaN : norm2(t.x[i]) / act;
    }
  });
  return out;
}

double activation_contraction(const Network& net, Samples samples, double zeta) {
  const auto per = activation_contraction_samples(net, samples);
  if (per.empty()) return 1.0;
  // A sample is excluded from c when any of its layers is fully clipped.
  std::vector<double> worst(samples.size(), 1.0);
  for (const auto& layer : per)
    for (std::size_t s = 0; s < layer.size(); ++s)
      worst[s] = (std::isnan(layer[s]) || std::isnan(worst[s])) ? kNaN : std::max(worst[s], layer[s]);
  return robust_extremum(worst, zeta, false);
}

double jacobian_beta(const Network& net, Samples samples, std::size_t i, std::size_t j) {
  require_samples(samples, net);
  if (i >= j || j > net.depth()) throw UsageError("jacobian_beta: need i < j <= depth");
  const double pixels = static_cast<double>(net.shape(i).pixels());
  std::vector<double> per(samples.size());
  kernels::parallel_for(samples.size(), [&](std::size_t s) {
    const ActivationTrace t = forward_trace(net, samples[s]);
    const auto slices = column_sweep(net, t, i)[j - i - 1];
    const double total = sum(slices);
    if (total == 0.0) {
      per[s] = kNaN;
      return;
    }
    per[s] = std::sqrt(pixels * *std::max_element(slices.begin(), slices.end()) / total);
  });
  double beta = kNaN;
  for (double b : per)
    if (!std::isnan(b)) beta = std::isnan(beta) ? b : std::max(beta, b);
  if (std::isnan(beta)) throw DegenerateError("jacobian_beta: Jacobian is zero on every sample");
  return beta;
}

namespace {

// Noise eta = (A_hat^i - A^i) phi(x^{i-1}) for one compressed draw of layer i.
struct CompressionNoise {
  CompressedLayer layer;
  std::vector<double> noise(const Network& net, std::size_t i, const ActivationTrace& t) const {
    const std::vector<double> in = t.activated(i - 1);
    std::vector<double> y(net.shape(i).size());
    if (!layer.local_filters.empty()) {
      kernels::conv_forward_local(layer.local_filters, std::get<ConvLayer>(layer.weights).stride, net.shape(i - 1), in,
                                  y);
    } else {
      apply_layer(layer.weights, net.shape(i - 1), in, y);
    }
    for (std::size_t p = 0; p < y.size(); ++p) y[p] -= t.x[i][p];
    return y;
  }
};

CompressionNoise draw_compression(const Network& net, std::size_t i, double eps, double work_limit,
                                  std::uint64_t seed) {
  CompressionNoise out;
  if (const auto* c = std::get_if<ConvLayer>(&net.layer(i))) {
    ConvProjectOptions o;
    o.quantize = false;
    o.clamp_to_full_space = true;
    o.layer_index = i;
    o.work_limit = work_limit;
    out.layer = conv_project_pwise(c->filter, eps, 0.1, c->stride, net.shape(i).height, net.shape(i).width,
                                   HelperString{seed, Scheme::ConvPwiseProject}, o);
  } else {
    MatrixProjectOptions o;
    o.quantize = false;
    o.layer_index = i;
    o.work_limit = work_limit;
    out.layer = matrix_project(std::get<DenseLayer>(net.layer(i)).weights, eps, 0.1,
                               HelperString{seed, Scheme::MatrixProject}, o);
  }
  return out;
}

}  // namespace

SmoothnessResult interlayer_smoothness(const Network& net, Samples samples, const SmoothnessOptions& options,
                                       RngStream stream) {
  require_samples(samples, net);
  if (!(options.delta > 0.0 && options.delta < 1.0)) throw UsageError("interlayer_smoothness: delta must lie in (0, 1)");
  if (static_cast<double>(options.trials) * options.delta < 1.0) {
    throw UsageError("interlayer_smoothness: trials must be at least 1/delta");
  }
  if (options.source == NoiseSource::Custom && !options.custom) {
    throw UsageError("interlayer_smoothness: custom noise source needs a generator");
  }
  SmoothnessResult res;
  res.delta = options.delta;
  const std::size_t d = net.depth();
  if (d < 2) return res;

  const std::vector<std::size_t> idx = spread_indices(samples.size(), options.sample_cap);
  std::vector<ActivationTrace> traces(idx.size());
  kernels::parallel_for(idx.size(), [&](std::size_t s) { traces[s] = forward_trace(net, samples[idx[s]]); });

  // r[i-1][s][(j - i - 1) * trials + t]
  const std::size_t trials = options.trials;
  std::vector<std::vector<std::vector<double>>> r(d - 1);
  for (std::size_t i = 1; i < d; ++i) r[i - 1].assign(idx.size(), std::vector<double>((d - i) * trials, kNaN));

  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 1; i < d; ++i) {
      CompressionNoise comp;
      if (options.source == NoiseSource::Compression) {
        comp = draw_compression(net, i, options.compression_eps, options.compression_work_limit,
                                mix64(stream.stream_id() ^ mix64(stream.master_seed() + t)));
      }
      kernels::parallel_for(idx.size(), [&](std::size_t s) {
        const ActivationTrace& tr = traces[s];
        const std::vector<double>& xi = tr.x[i];
        const double xin = norm2(xi);
        if (xin == 0.0) return;
        std::vector<double> eta;
        switch (options.source) {
          case NoiseSource::Gaussian: {
            RngStream g = stream.derive(idx[s]).derive(i).derive(t);
            eta = gaussian_with_norm(g, xi.size(), options.gaussian_rel_norm * xin);
            break;
          }
          case NoiseSource::Compression:
            eta = comp.noise(net, i, tr);
            break;
          case NoiseSource::Custom:
            eta = options.custom(idx[s], i, t, xi);
            break;
        }
        if (eta.size() != xi.size()) throw ShapeError("interlayer_smoothness: noise has the wrong dimension");
        const double etan = norm2(eta);
        // u tracks M(x^i + eta), v tracks J(x^i + eta), w = u - v computed from
        // the mask disagreements only, so it is exactly zero in a linear region.
        std::vector<double> u(xi), v(xi), w(xi.size(), 0.0);
        for (std::size_t p = 0; p < u.size(); ++p) {
          u[p] += eta[p];
          v[p] = u[p];
        }
        for (std::size_t k = i; k < d; ++k) {
          const auto& mask = tr.masks[k];
          std::vector<double> ru(u.size()), dv(v.size()), gap(u.size());
          for (std::size_t p = 0; p < u.size(); ++p) {
            ru[p] = u[p] > 0.0 ? u[p] : 0.0;
            dv[p] = mask[p] ? v[p] : 0.0;
            // relu(u) - D v = (relu(u) - D u) + D w
            const double flip = ru[p] - (mask[p] ? u[p] : 0.0);
            gap[p] = flip + (mask[p] ? w[p] : 0.0);
          }
          u = apply(net, k + 1, ru);
          v = apply(net, k + 1, dv);
          w = apply(net, k + 1, gap);
          const double xjn = norm2(tr.x[k + 1]);
          const double wn = norm2(w);
          double& slot = r[i - 1][s][(k - i) * trials + t];
          if (xjn == 0.0) continue;
          slot = wn == 0.0 ? kInf : etan * xjn / (xin * wn);
        }
      });
    }
  }

  for (std::size_t i = 1; i < d; ++i)
    for (std::size_t s = 0; s < idx.size(); ++s)
      for (std::size_t j = i + 1; j <= d; ++j) {
        std::vector<double> vals;
        for (std::size_t t = 0; t < trials; ++t) {
          const double x = r[i - 1][s][(j - i - 1) * trials + t];
          if (!std::isnan(x)) vals.push_back(x);
        }
        if (vals.empty()) continue;
        const double q = lower_quantile(std::move(vals), options.delta);
        if (q < res.rho) {
          res.rho = q;
          res.worst_sample = idx[s];
          res.worst_i = i;
          res.worst_j = j;
        }
      }
  return res;
}

std::vector<std::vector<double>> attenuation_profile(const Network& net, Samples samples, double rel_norm,
                                                     RngStream stream) {
  require_samples(samples, net);
  if (!(rel_norm > 0.0)) throw UsageError("attenuation_profile: rel_norm must be positive");
  const std::size_t d = net.depth();
  std::vector<std::vector<double>> curves;
  for (std::size_t i = 1; i < d; ++i) {
    std::vector<std::vector<double>> per(samples.size());
    kernels::parallel_for(samples.size(), [&](std::size_t s) {
      const ActivationTrace t = forward_trace(net, samples[s]);
      try {
        per[s] = inject_noise(net, t, i, rel_norm, stream.derive(i).derive(s));
      } catch (const DegenerateError&) {
        per[s].clear();
      }
    });
    std::vector<double> mean(d - i + 1, 0.0);
    std::size_t used = 0;
    for (const auto& c : per) {
      if (c.empty()) continue;
      ++used;
      for (std::size_t k = 0; k < c.size(); ++k) mean[k] += c[k];
    }
    if (used == 0) throw DegenerateError("attenuation_profile: every sample has a zero activation at layer " +
                                         std::to_string(i));
    for (double& m : mean) m /= static_cast<double>(used);
    curves.push_back(std::move(mean));
  }
  return curves;
}

StabilityConstants StabilityReport::constants() const { return {mu, mu_to, c, beta}; }

StabilityReport measure_stability(const Network& net, Samples samples, const StabilityOptions& options) {
  require_samples(samples, net);
  const std::size_t d = net.depth();
  StabilityReport rep;
  rep.depth = d;
  rep.samples = samples.size();
  rep.zeta = options.zeta;
  rep.conv_cushion = options.cushion_mode == StabilityOptions::CushionMode::Conv ||
                     (options.cushion_mode == StabilityOptions::CushionMode::Auto && net.has_conv());

  const std::vector<ActivationTrace> traces = traces_of(net, samples);

  // Layer cushion and activation contraction from the traces.
  rep.mu_samples.assign(d, std::vector<double>(samples.size()));
  rep.c_samples.assign(d > 0 ? d - 1 : 0, std::vector<double>(samples.size()));
  std::vector<double> fro(d);
  for (std::size_t i = 1; i <= d; ++i) {
    fro[i - 1] = layer_frobenius_norm(net.layer(i));
    if (fro[i - 1] == 0.0) throw DegenerateError("layer " + std::to_string(i) + " is zero");
  }
  std::vector<std::uint8_t> excluded(samples.size(), 0);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const ActivationTrace& t = traces[s];
    for (std::size_t i = 1; i <= d; ++i) {
      const double in = norm2(t.activated(i - 1));
      rep.mu_samples[i - 1][s] = in == 0.0 ? kNaN : norm2(t.x[i]) / (fro[i - 1] * in);
      if (in == 0.0) excluded[s] = 1;
      if (i < d) {
        const double act = norm2(t.activated(i));
        rep.c_samples[i - 1][s] = act == 0.0 ? kNaN : norm2(t.x[i]) / act;
        if (act == 0.0) excluded[s] = 1;
      }
    }
  }
  for (std::uint8_t e : excluded) rep.excluded += e;
  if (rep.excluded > 0) {
    rep.warnings.push_back(std::to_string(rep.excluded) +
                           " sample(s) have a fully clipped layer and were excluded (counted toward zeta)");
  }
  for (std::size_t i = 0; i < d; ++i) rep.mu.push_back(robust_extremum(rep.mu_samples[i], options.zeta, true));
  rep.c = 1.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    rep.c_layer.push_back(robust_extremum(rep.c_samples[i], options.zeta, false));
  }
  {
    std::vector<double> worst(samples.size(), 1.0);
    for (const auto& layer : rep.c_samples)
      for (std::size_t s = 0; s < layer.size(); ++s)
        worst[s] = (std::isnan(layer[s]) || std::isnan(worst[s])) ? kNaN : std::max(worst[s], layer[s]);
    if (!rep.c_samples.empty()) rep.c = robust_extremum(worst, options.zeta, false);
  }

  // Interlayer cushions and beta from one column sweep per (sample, layer).
  const std::vector<std::size_t> idx = spread_indices(samples.size(), options.jacobian_sample_cap);
  rep.mu_ij.assign(d, std::vector<double>(d, kNaN));
  rep.mu_ij_samples.assign(d, std::vector<std::vector<double>>(d));
  for (std::size_t i = 1; i <= d; ++i)
    for (std::size_t j = i + 1; j <= d; ++j) rep.mu_ij_samples[i - 1][j - 1].assign(idx.size(), kNaN);
  std::vector<std::vector<double>> beta_samples(d, std::vector<double>(idx.size(), 1.0));
  kernels::parallel_for(idx.size(), [&](std::size_t k) {
    const ActivationTrace& t = traces[idx[k]];
    for (std::size_t i = 1; i < d; ++i) {
      const Shape si = net.shape(i);
      const double xi = norm2(t.x[i]);
      const auto sweep = column_sweep(net, t, i);
      for (std::size_t j = i + 1; j <= d; ++j) {
        const auto& slices = sweep[j - i - 1];
        const double total = sum(slices);
        if (xi == 0.0 || total == 0.0) continue;
        rep.mu_ij_samples[i - 1][j - 1][k] =
            norm2(t.x[j]) / (cushion_scale(si, rep.conv_cushion) * std::sqrt(total) * xi);
        const double b =
            std::sqrt(static_cast<double>(si.pixels()) * *std::max_element(slices.begin(), slices.end()) / total);
        beta_samples[i - 1][k] = std::max(beta_samples[i - 1][k], b);
      }
    }
  });
  for (std::size_t i = 1; i <= d; ++i) {
    const double diag = 1.0 / std::sqrt(width_for_cushion(net.shape(i), rep.conv_cushion));
    rep.mu_ij[i - 1][i - 1] = diag;
    double to = diag;
    for (std::size_t j = i + 1; j <= d; ++j) {
      rep.mu_ij[i - 1][j - 1] = robust_extremum(rep.mu_ij_samples[i - 1][j - 1], options.zeta, true);
      to = std::min(to, rep.mu_ij[i - 1][j - 1]);
    }
    rep.mu_to.push_back(to);
    rep.beta.push_back(is_conv(net.layer(i)) ? *std::max_element(beta_samples[i - 1].begin(), beta_samples[i - 1].end())
                                             : 1.0);
  }

  if (options.measure_smoothness) {
    rep.rho = interlayer_smoothness(net, samples, options.smoothness, RngStream(options.seed, 0x52484F));
    rep.rho_measured = true;
  }
  return rep;
}

}  // namespace nscomp
