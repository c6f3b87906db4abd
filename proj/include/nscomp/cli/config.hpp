#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nscomp/netlab/synthetic.hpp"
#include "nscomp/netlab/train.hpp"

namespace nscomp {

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;

  std::string dataset_path;  // empty: generate `synthetic`
  BlobConfig synthetic;
  bool shuffle_labels = false;
  std::string dataset_format = "nsds";  // what `synth` writes: nsds or csv

  std::string model_path;
  std::vector<LayerSpec> arch;
  TrainConfig train;  // train.seed is ignored; training draws from `seed`

  std::optional<double> gamma;  // unset: the gamma_quantile margin of the trained net
  double gamma_quantile = 0.05;
  std::optional<double> eps;  // unset: from gamma
  double delta = 0.1;
  std::optional<double> eta;  // unset: from delta
  double zeta = 0.0;
  bool zeta_quantile = false;  // measure constants at the zeta quantile
  double rel_norm = 0.1;
  std::size_t trials = 200;
  std::string scheme = "fc";
  std::string out = "out";

  double q_constant = 4.0;
  double svd_constant = 3.0;
  std::size_t sample_cap = 0;  // 0: every sample
  std::size_t jacobian_sample_cap = 64;
  std::size_t smoothness_sample_cap = 64;
  double verify_scale = 1.0;
};

// Every field, including defaults. Key order is fixed.
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);

// Unknown keys and ill-typed values raise UsageError naming the key.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

// Range checks, run before any work. Throws UsageError.
void validate_config(const ExperimentConfig& c);

// FNV-1a of the canonical JSON without the output directory, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Bundled desk-scale experiments.
ExperimentConfig desk_mlp_config(std::uint64_t seed);
ExperimentConfig desk_conv_config(std::uint64_t seed);
ExperimentConfig smoke_config(std::uint64_t seed);

}  // namespace nscomp
