#include "nscomp/cli/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "nscomp/cli/dataset_io.hpp"
#include "nscomp/error.hpp"
#include "nscomp/netlab/synthetic.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

namespace {

enum Stage : std::uint64_t { kData = 1, kShuffle, kInit, kTrain, kStability, kHelper, kAttenuation };

}  // namespace

RngStream experiment_stream(const ExperimentConfig& c, std::uint64_t stage) {
  return RngStream(c.seed, mix64(0x4E53434Full + stage));
}

Dataset prepare_dataset(const ExperimentConfig& c) {
  Dataset d = c.dataset_path.empty() ? make_blobs(c.synthetic, experiment_stream(c, kData)) : load_dataset(c.dataset_path);
  if (c.shuffle_labels) d = shuffle_labels(d, experiment_stream(c, kShuffle));
  return d;
}

TrainedModel train_model(const ExperimentConfig& c, const Dataset& data) {
  if (c.arch.empty()) throw UsageError("train: the config has no architecture");
  if (c.arch.back().outputs != data.classes) {
    throw UsageError("train: the last layer has " + std::to_string(c.arch.back().outputs) + " outputs but the data has " +
                     std::to_string(data.classes) + " classes");
  }
  TrainedModel m;
  m.init = init_network(data.input_shape, c.arch, experiment_stream(c, kInit));
  TrainConfig tc = c.train;
  tc.seed = experiment_stream(c, kTrain).bits(0);
  TrainResult r = train_sgd(m.init, data, tc);
  m.net = std::move(r.net);
  m.log = std::move(r.log);
  m.accuracy = accuracy(m.net, data);
  return m;
}

std::vector<std::vector<double>> stability_samples(const ExperimentConfig& c, const Dataset& data) {
  const std::size_t n = c.sample_cap > 0 ? std::min(c.sample_cap, data.size()) : data.size();
  return {data.inputs.begin(), data.inputs.begin() + static_cast<std::ptrdiff_t>(n)};
}

double max_output_norm(const Network& net, const Dataset& data) {
  double m = 0.0;
  for (const auto& x : data.inputs) m = std::max(m, norm2(net.forward(x)));
  return m;
}

double resolve_gamma(const ExperimentConfig& c, const Network& net, const Dataset& data) {
  if (c.gamma) return *c.gamma;
  std::vector<double> m = margins(net, data);
  std::sort(m.begin(), m.end());
  const auto idx = static_cast<std::size_t>(std::floor(c.gamma_quantile * static_cast<double>(m.size())));
  const double g = m[std::min(idx, m.size() - 1)];
  if (!(g > 0.0)) {
    throw DegenerateError("the " + std::to_string(c.gamma_quantile) + " quantile margin is " + std::to_string(g) +
                          "; pass --gamma or train further");
  }
  return g;
}

StabilityReport run_measure(const ExperimentConfig& c, const Network& net, const Dataset& data, bool smoothness) {
  StabilityOptions o;
  o.zeta = c.zeta_quantile ? c.zeta : 0.0;
  o.measure_smoothness = smoothness;
  o.smoothness.delta = c.delta;
  o.smoothness.trials = c.trials;
  o.smoothness.sample_cap = c.smoothness_sample_cap;
  o.jacobian_sample_cap = c.jacobian_sample_cap;
  o.seed = experiment_stream(c, kStability).bits(0);
  return measure_stability(net, stability_samples(c, data), o);
}

CompressionOutcome run_compress(const ExperimentConfig& c, const Network& net, const Dataset& data,
                                const StabilityReport& stability, double gamma, std::uint64_t helper_seed) {
  CompressionOutcome out;
  out.gamma = gamma;
  out.original_params = net.param_count();
  const double fmax = max_output_norm(net, data);
  out.eps = c.eps ? *c.eps : std::min(1.0, epsilon_from_margin(gamma, fmax));
  out.loss_gamma_original = margin_loss(net, data, gamma).loss;
  if (c.scheme == "svd") {
    SvdCompressOptions so;
    so.constant = c.svd_constant;
    SvdCompressResult r = compress_network_svd(net, gamma, data.inputs, so);
    out.net = std::move(r.net);
    out.svd_within_gamma = r.within_gamma;
    out.svd_max_gap = r.max_gap;
  } else {
    CompressOptions co;
    co.conv.q_constant = c.q_constant;
    if (c.eta) co.eta_override = *c.eta;
    const HelperString helper{helper_seed, c.scheme == "conv" ? Scheme::ConvPwiseProject : Scheme::MatrixProject};
    out.net = c.scheme == "conv"
                  ? compress_network_conv(net, stability.constants(), out.eps, c.delta, data.size(), helper, co)
                  : compress_network_fc(net, stability.constants(), out.eps, c.delta, data.size(), helper, co);
  }
  out.max_distortion = max_relative_distortion(net, out.net, data.inputs);
  const Predictor g = [&](std::span<const double> x) { return out.net.forward(x); };
  out.loss0_compressed = margin_loss(g, data, 0.0).loss;
  return out;
}

std::uint64_t helper_seed_for(const ExperimentConfig& c) { return experiment_stream(c, kHelper).bits(0); }

BoundReport run_bound(const ExperimentConfig& c, const Network& net, const Dataset& data,
                      const StabilityReport& stability, double gamma) {
  BoundOptions o;
  o.delta = c.delta;
  o.zeta = c.zeta;
  return make_bound_report(net, data, CapacityInputs{stability.constants(), stability.c_layer}, gamma, o);
}

std::vector<std::vector<double>> run_attenuation(const ExperimentConfig& c, const Network& net, const Dataset& data) {
  return attenuation_profile(net, stability_samples(c, data), c.rel_norm, experiment_stream(c, kAttenuation));
}

}  // namespace nscomp
