#include "nscomp/cli/reports.hpp"

#include <charconv>
#include <cmath>

#include "nscomp/compressors/helper.hpp"

#ifndef NSCOMP_VERSION
#define NSCOMP_VERSION "dev"
#endif

namespace nscomp {

namespace {

ojson numbers(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

const char* tool_version() { return NSCOMP_VERSION; }

ojson json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ojson envelope(const std::string& kind, const ExperimentConfig& c, ojson report) {
  ojson j;
  j["tool"] = "nscomp";
  j["version"] = tool_version();
  j["kind"] = kind;
  j["seed"] = c.seed;
  j["config_hash"] = config_hash(c);
  ojson cfg = config_to_json(c);
  cfg.erase("out");
  j["config"] = std::move(cfg);
  j["report"] = std::move(report);
  return j;
}

std::string dump_report(const ojson& j) { return j.dump(2) + "\n"; }

ojson train_to_json(const TrainedModel& m) {
  ojson j;
  j["train_accuracy"] = m.accuracy;
  j["params"] = m.net.param_count();
  j["depth"] = m.net.depth();
  j["loss"] = numbers(m.log.loss);
  j["epoch_accuracy"] = numbers(m.log.train_accuracy);
  return j;
}

ojson stability_to_json(const StabilityReport& r) {
  ojson j;
  j["depth"] = r.depth;
  j["samples"] = r.samples;
  j["zeta"] = r.zeta;
  j["conv_cushion"] = r.conv_cushion;
  j["mu"] = numbers(r.mu);
  ojson mij = ojson::array();
  for (const auto& row : r.mu_ij) mij.push_back(numbers(row));
  j["mu_ij"] = std::move(mij);
  j["mu_to"] = numbers(r.mu_to);
  j["c_layer"] = numbers(r.c_layer);
  j["c"] = json_number(r.c);
  j["beta"] = numbers(r.beta);
  if (r.rho_measured) {
    j["rho"] = {{"value", json_number(r.rho.rho)},
                {"delta", r.rho.delta},
                {"worst_sample", r.rho.worst_sample},
                {"worst_i", r.rho.worst_i},
                {"worst_j", r.rho.worst_j}};
  } else {
    j["rho"] = nullptr;
  }
  j["excluded"] = r.excluded;
  j["warnings"] = r.warnings;
  return j;
}

ojson compression_to_json(const CompressionOutcome& r) {
  ojson j;
  j["scheme"] = scheme_name(r.net.scheme);
  j["gamma"] = json_number(r.gamma);
  j["eps"] = json_number(r.eps);
  j["eta"] = json_number(r.net.eta);
  j["per_layer_eps"] = numbers(r.net.per_layer_eps);
  j["original_params"] = r.original_params;
  j["compressed_params"] = r.net.total_params();
  j["max_levels"] = r.net.max_levels();
  j["max_relative_distortion"] = json_number(r.max_distortion);
  j["margin_loss_gamma_original"] = r.loss_gamma_original;
  j["margin_loss_zero_compressed"] = r.loss0_compressed;
  if (r.net.scheme == Scheme::SvdTruncate) {
    j["svd_delta"] = json_number(r.net.svd_delta);
    j["svd_max_gap"] = json_number(r.svd_max_gap);
    j["svd_within_gamma"] = r.svd_within_gamma;
  }
  ojson layers = ojson::array();
  for (std::size_t i = 0; i < r.net.layers.size(); ++i) {
    const CompressedLayer& l = r.net.layers[i];
    ojson e;
    e["layer"] = i + 1;
    e["scheme"] = scheme_name(l.scheme);
    e["params"] = l.param_count;
    e["k"] = l.k;
    e["p"] = l.p;
    e["levels"] = l.quantization_levels;
    e["grid"] = json_number(l.grid);
    e["materialized"] = l.materialized;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j;
}

ojson bound_to_json(const BoundReport& r) {
  ojson j;
  j["gamma"] = json_number(r.gamma);
  j["margin_loss"] = r.margin_loss;
  j["max_output_norm"] = json_number(r.max_output_norm);
  j["epsilon"] = json_number(r.epsilon);
  j["q_fc"] = json_number(r.q_fc);
  j["q_conv"] = json_number(r.q_conv);
  j["levels"] = json_number(r.levels);
  j["penalty"] = json_number(r.penalty);
  j["ours"] = {{"capacity", json_number(r.ours.capacity)}, {"closed_form", json_number(r.ours.closed_form)}};
  j["baselines"] = {{"l1inf", json_number(r.baselines.l1inf)},
                    {"frobenius_prod", json_number(r.baselines.frobenius_prod)},
                    {"spec_l12", json_number(r.baselines.spec_l12)},
                    {"spec_fro", json_number(r.baselines.spec_fro)}};
  j["specfro_closed_form"] = json_number(r.specfro_closed_form);
  j["norm_conventions"] = {{"l1inf", "max over rows of the row l1 norm"},
                           {"l12", "sum over columns of the column l2 norm"},
                           {"conv", "conv layers enter through their unrolled matrices"}};
  ojson rows = ojson::array();
  for (const EffectiveRow& e : r.per_layer) {
    rows.push_back({{"layer", e.layer},
                    {"effective", json_number(e.effective)},
                    {"actual", e.actual},
                    {"percent", json_number(e.percent)}});
  }
  j["per_layer_effective"] = std::move(rows);
  j["notes"] = r.notes;
  return j;
}

ojson tail_to_json(const TailReport& r) {
  ojson j;
  j["id"] = r.id;
  j["kind"] = r.kind;
  j["trials"] = r.trials;
  j["threshold"] = json_number(r.threshold);
  j["failures"] = r.failures;
  j["empirical"] = json_number(r.empirical);
  j["bound"] = json_number(r.bound);
  j["std_error"] = json_number(r.std_error);
  j["pass"] = r.pass;
  j["gate"] = r.gate;
  ojson p;
  for (const auto& [k, v] : r.params) p[k] = json_number(v);
  j["params"] = std::move(p);
  return j;
}

std::string stability_samples_csv(const StabilityReport& r) {
  std::string out = "quantity,i,j,sample,value\n";
  auto row = [&](const char* q, std::size_t i, std::size_t j, std::size_t s, double v) {
    out += q;
    out += "," + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(s) + "," + fmt(v) + "\n";
  };
  for (std::size_t i = 0; i < r.mu_samples.size(); ++i)
    for (std::size_t s = 0; s < r.mu_samples[i].size(); ++s) row("layer_cushion", i + 1, i + 1, s, r.mu_samples[i][s]);
  for (std::size_t i = 0; i < r.mu_ij_samples.size(); ++i)
    for (std::size_t j = 0; j < r.mu_ij_samples[i].size(); ++j)
      for (std::size_t s = 0; s < r.mu_ij_samples[i][j].size(); ++s)
        row("interlayer_cushion", i + 1, j + 1, s, r.mu_ij_samples[i][j][s]);
  for (std::size_t i = 0; i < r.c_samples.size(); ++i)
    for (std::size_t s = 0; s < r.c_samples[i].size(); ++s) row("activation_contraction", i + 1, i + 1, s, r.c_samples[i][s]);
  return out;
}

std::string effective_params_csv(const std::vector<EffectiveRow>& rows) {
  std::string out = "layer,effective,actual,percent\n";
  for (const EffectiveRow& e : rows) {
    out += std::to_string(e.layer) + "," + fmt(e.effective) + "," + std::to_string(e.actual) + "," + fmt(e.percent) +
           "\n";
  }
  return out;
}

std::string attenuation_csv(const std::vector<std::vector<double>>& curves) {
  std::string out = "inject_layer,layer,mean_rel_error\n";
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t k = 0; k < curves[i].size(); ++k) {
      out += std::to_string(i + 1) + "," + std::to_string(i + 1 + k) + "," + fmt(curves[i][k]) + "\n";
    }
  return out;
}

}  // namespace nscomp
