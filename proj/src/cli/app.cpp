#include "nscomp/cli/app.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "nscomp/cli/dataset_io.hpp"
#include "nscomp/cli/experiment.hpp"
#include "nscomp/cli/fileio.hpp"
#include "nscomp/cli/model_io.hpp"
#include "nscomp/cli/reports.hpp"
#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"

namespace nscomp {

namespace {

struct Flags {
  std::optional<std::string> config, data, model, scheme, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma, eps, delta, eta, zeta, rel_norm;
  std::optional<std::size_t> trials;
  bool zeta_quantile = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON experiment config");
  sub->add_option("--data", f.data, "dataset file (NSDS binary or CSV)");
  sub->add_option("--model", f.model, "model JSON");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--gamma", f.gamma, "margin");
  sub->add_option("--eps", f.eps, "compression accuracy");
  sub->add_option("--delta", f.delta, "failure probability / smoothness quantile");
  sub->add_option("--eta", f.eta, "per-layer failure probability of the projections");
  sub->add_option("--zeta", f.zeta, "outlier fraction");
  sub->add_flag("--zeta-quantile", f.zeta_quantile, "measure constants at the zeta quantile");
  sub->add_option("--rel-norm", f.rel_norm, "relative norm of injected noise");
  sub->add_option("--trials", f.trials, "Monte Carlo trials");
  sub->add_option("--scheme", f.scheme, "compression scheme: fc, conv or svd");
  sub->add_option("--out", f.out, "output directory");
}

ExperimentConfig build_config(const std::string& command, const Flags& f) {
  ExperimentConfig c = desk_mlp_config(0);
  if (f.config) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(*f.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("config " + *f.config + ": malformed JSON at byte offset " + std::to_string(e.byte));
    }
    c = config_from_json(j, c);
  }
  c.command = command;
  if (f.data) c.dataset_path = *f.data;
  if (f.model) c.model_path = *f.model;
  if (f.seed) c.seed = *f.seed;
  if (f.gamma) c.gamma = *f.gamma;
  if (f.eps) c.eps = *f.eps;
  if (f.delta) c.delta = *f.delta;
  if (f.eta) c.eta = *f.eta;
  if (f.zeta) c.zeta = *f.zeta;
  if (f.zeta_quantile) c.zeta_quantile = true;
  if (f.rel_norm) c.rel_norm = *f.rel_norm;
  if (f.trials) {
    c.trials = *f.trials;
    if (command == "verify") c.verify_scale = static_cast<double>(*f.trials) / 1e4;
  }
  if (f.scheme) c.scheme = *f.scheme;
  if (f.out) c.out = *f.out;
  validate_config(c);
  return c;
}

Network require_model(const ExperimentConfig& c) {
  if (c.model_path.empty()) throw UsageError(c.command + ": pass --model or set \"model\" in the config");
  return load_model(c.model_path).net;
}

void say(const std::string& line) { std::cout << line << std::endl; }

void write_json(OutputSet& out, const std::string& name, const std::string& kind, const ExperimentConfig& c,
                ojson body) {
  out.write(name, dump_report(envelope(kind, c, std::move(body))));
  say("wrote " + out.path(name));
}

void write_text(OutputSet& out, const std::string& name, const std::string& text) {
  out.write(name, text);
  say("wrote " + out.path(name));
}

int cmd_synth(const ExperimentConfig& c, OutputSet& out) {
  const Dataset d = prepare_dataset(c);
  const std::string name = c.dataset_format == "csv" ? "dataset.csv" : "dataset.nsds";
  if (c.dataset_format == "csv") save_dataset_csv(d, out.path(name));
  else save_dataset_binary(d, out.path(name));
  say("wrote " + out.path(name) + " (" + std::to_string(d.size()) + " records)");
  return 0;
}

TrainedModel do_train(const ExperimentConfig& c, const Dataset& d, OutputSet& out) {
  TrainedModel m = train_model(c, d);
  out.write("model.json", model_to_json(m.net, TrainingMeta{c.seed, c.train.epochs, m.accuracy}));
  say("wrote " + out.path("model.json") + " (train accuracy " + std::to_string(m.accuracy) + ")");
  write_json(out, "train.json", "train", c, train_to_json(m));
  return m;
}

StabilityReport do_measure(const ExperimentConfig& c, const Network& net, const Dataset& d, OutputSet& out) {
  StabilityReport r = run_measure(c, net, d, true);
  write_json(out, "stability.json", "stability", c, stability_to_json(r));
  write_text(out, "stability_samples.csv", stability_samples_csv(r));
  return r;
}

void do_compress(const ExperimentConfig& c, const Network& net, const Dataset& d, const StabilityReport& s,
                 double gamma, OutputSet& out) {
  const CompressionOutcome r = run_compress(c, net, d, s, gamma, helper_seed_for(c));
  write_json(out, "compression.json", "compression", c, compression_to_json(r));
}

void do_bound(const ExperimentConfig& c, const Network& net, const Dataset& d, const StabilityReport& s, double gamma,
              OutputSet& out) {
  const BoundReport r = run_bound(c, net, d, s, gamma);
  write_json(out, "bound.json", "bound", c, bound_to_json(r));
  write_text(out, "effective_params.csv", effective_params_csv(r.per_layer));
}

int cmd_verify(const ExperimentConfig& c, OutputSet& out) {
  VerifyOptions o;
  o.scale = c.verify_scale;
  const std::vector<TailReport> reports = run_verify_suite(c.seed, o);
  ojson arr = ojson::array();
  std::size_t failed = 0;
  for (const TailReport& r : reports) {
    arr.push_back(tail_to_json(r));
    if (r.gate && !r.pass) ++failed;
    say(std::string(r.pass ? "PASS " : (r.gate ? "FAIL " : "INFO ")) + r.id);
  }
  write_json(out, "verify.json", "verify", c, std::move(arr));
  out.commit();
  if (failed > 0) {
    say(std::to_string(failed) + " of " + std::to_string(reports.size()) + " checks failed");
    return 1;
  }
  return 0;
}

int dispatch(const ExperimentConfig& c) {
  OutputSet out(c.out);
  int code = 0;
  if (c.command == "synth") {
    code = cmd_synth(c, out);
  } else if (c.command == "verify") {
    return cmd_verify(c, out);
  } else if (c.command == "train") {
    do_train(c, prepare_dataset(c), out);
  } else if (c.command == "pipeline") {
    const Dataset d = prepare_dataset(c);
    const TrainedModel m = do_train(c, d, out);
    const double gamma = resolve_gamma(c, m.net, d);
    const StabilityReport s = do_measure(c, m.net, d, out);
    do_compress(c, m.net, d, s, gamma, out);
    do_bound(c, m.net, d, s, gamma, out);
    write_text(out, "attenuation.csv", attenuation_csv(run_attenuation(c, m.net, d)));
  } else {
    const Network net = require_model(c);
    const Dataset d = prepare_dataset(c);
    if (c.command == "measure") {
      do_measure(c, net, d, out);
    } else if (c.command == "attenuate") {
      write_text(out, "attenuation.csv", attenuation_csv(run_attenuation(c, net, d)));
    } else {
      const double gamma = resolve_gamma(c, net, d);
      const StabilityReport s = run_measure(c, net, d, false);
      if (c.command == "compress") do_compress(c, net, d, s, gamma, out);
      else do_bound(c, net, d, s, gamma, out);
    }
  }
  out.commit();
  return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"nscomp: compression-based generalization measurements for ReLU networks"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", tool_version());
  Flags flags;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "generate a synthetic dataset"},
      {"train", "train a network on a dataset"},
      {"measure", "measure the stability constants of a model"},
      {"compress", "compress a model (fc, conv or svd scheme)"},
      {"bound", "generalization bound report and per-layer table"},
      {"attenuate", "noise attenuation curves"},
      {"verify", "Monte Carlo checks of the concentration bounds"},
      {"pipeline", "train, measure, compress and bound end to end"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  kernels::apply_env_thread_cap();

  try {
    const ExperimentConfig c = build_config(app.get_subcommands().front()->get_name(), flags);
    return dispatch(c);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nscomp
