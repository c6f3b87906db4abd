#include "nscomp/cli/config.hpp"

#include <cmath>
#include <cstdio>

#include "nscomp/error.hpp"

namespace nscomp {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

const char* kind_name(LayerSpec::Kind k) { return k == LayerSpec::Kind::Conv ? "conv" : "dense"; }

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: key '" + key + "' has the wrong type (" + j.dump() + ")");
  }
}

std::size_t get_size(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw UsageError("config: key '" + key + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

std::optional<double> get_optional(const json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return get_as<double>(j, key);
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw UsageError("config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

}  // namespace

ojson config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  ojson data;
  data["path"] = c.dataset_path;
  data["count"] = c.synthetic.count;
  data["classes"] = c.synthetic.classes;
  data["features"] = c.synthetic.features;
  data["channels"] = c.synthetic.channels;
  data["size"] = c.synthetic.size;
  data["spread"] = c.synthetic.spread;
  data["shuffle_labels"] = c.shuffle_labels;
  data["format"] = c.dataset_format;
  j["dataset"] = data;
  j["model"] = c.model_path;
  ojson arch = ojson::array();
  for (const LayerSpec& l : c.arch) {
    ojson e;
    e["kind"] = kind_name(l.kind);
    e["outputs"] = l.outputs;
    if (l.kind == LayerSpec::Kind::Conv) {
      e["width"] = l.width;
      e["stride"] = l.stride;
    }
    arch.push_back(e);
  }
  j["arch"] = arch;
  ojson train;
  train["epochs"] = c.train.epochs;
  train["lr"] = c.train.lr;
  train["momentum"] = c.train.momentum;
  train["batch_size"] = c.train.batch_size;
  j["train"] = train;
  j["gamma"] = optional_json(c.gamma);
  j["gamma_quantile"] = c.gamma_quantile;
  j["eps"] = optional_json(c.eps);
  j["delta"] = c.delta;
  j["eta"] = optional_json(c.eta);
  j["zeta"] = c.zeta;
  j["zeta_quantile"] = c.zeta_quantile;
  j["rel_norm"] = c.rel_norm;
  j["trials"] = c.trials;
  j["scheme"] = c.scheme;
  j["out"] = c.out;
  j["q_constant"] = c.q_constant;
  j["svd_constant"] = c.svd_constant;
  j["sample_cap"] = c.sample_cap;
  j["jacobian_sample_cap"] = c.jacobian_sample_cap;
  j["smoothness_sample_cap"] = c.smoothness_sample_cap;
  j["verify_scale"] = c.verify_scale;
  return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  check_keys(j, "",
             {"command", "seed", "dataset", "model", "arch", "train", "gamma", "gamma_quantile", "eps", "delta", "eta",
              "zeta", "zeta_quantile", "rel_norm", "trials", "scheme", "out", "q_constant", "svd_constant",
              "sample_cap", "jacobian_sample_cap", "smoothness_sample_cap", "verify_scale"});
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "command") c.command = get_as<std::string>(v, k);
    else if (k == "seed") c.seed = get_size(v, k);
    else if (k == "model") c.model_path = get_as<std::string>(v, k);
    else if (k == "gamma") c.gamma = get_optional(v, k);
    else if (k == "gamma_quantile") c.gamma_quantile = get_as<double>(v, k);
    else if (k == "eps") c.eps = get_optional(v, k);
    else if (k == "delta") c.delta = get_as<double>(v, k);
    else if (k == "eta") c.eta = get_optional(v, k);
    else if (k == "zeta") c.zeta = get_as<double>(v, k);
    else if (k == "zeta_quantile") c.zeta_quantile = get_as<bool>(v, k);
    else if (k == "rel_norm") c.rel_norm = get_as<double>(v, k);
    else if (k == "trials") c.trials = get_size(v, k);
    else if (k == "scheme") c.scheme = get_as<std::string>(v, k);
    else if (k == "out") c.out = get_as<std::string>(v, k);
    else if (k == "q_constant") c.q_constant = get_as<double>(v, k);
    else if (k == "svd_constant") c.svd_constant = get_as<double>(v, k);
    else if (k == "sample_cap") c.sample_cap = get_size(v, k);
    else if (k == "jacobian_sample_cap") c.jacobian_sample_cap = get_size(v, k);
    else if (k == "smoothness_sample_cap") c.smoothness_sample_cap = get_size(v, k);
    else if (k == "verify_scale") c.verify_scale = get_as<double>(v, k);
    else if (k == "dataset") {
      check_keys(v, "dataset",
                 {"path", "count", "classes", "features", "channels", "size", "spread", "shuffle_labels", "format"});
      for (auto d = v.begin(); d != v.end(); ++d) {
        const std::string key = "dataset." + d.key();
        if (d.key() == "path") c.dataset_path = get_as<std::string>(*d, key);
        else if (d.key() == "count") c.synthetic.count = get_size(*d, key);
        else if (d.key() == "classes") c.synthetic.classes = get_size(*d, key);
        else if (d.key() == "features") c.synthetic.features = get_size(*d, key);
        else if (d.key() == "channels") c.synthetic.channels = get_size(*d, key);
        else if (d.key() == "size") c.synthetic.size = get_size(*d, key);
        else if (d.key() == "spread") c.synthetic.spread = get_as<double>(*d, key);
        else if (d.key() == "shuffle_labels") c.shuffle_labels = get_as<bool>(*d, key);
        else c.dataset_format = get_as<std::string>(*d, key);
      }
    } else if (k == "train") {
      check_keys(v, "train", {"epochs", "lr", "momentum", "batch_size"});
      for (auto t = v.begin(); t != v.end(); ++t) {
        const std::string key = "train." + t.key();
        if (t.key() == "epochs") c.train.epochs = get_size(*t, key);
        else if (t.key() == "lr") c.train.lr = get_as<double>(*t, key);
        else if (t.key() == "momentum") c.train.momentum = get_as<double>(*t, key);
        else c.train.batch_size = get_size(*t, key);
      }
    } else if (k == "arch") {
      if (!v.is_array()) throw UsageError("config: 'arch' must be an array");
      c.arch.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string where = "arch[" + std::to_string(i) + "]";
        check_keys(v[i], where, {"kind", "outputs", "width", "stride"});
        LayerSpec l;
        const std::string kind = v[i].contains("kind") ? get_as<std::string>(v[i]["kind"], where + ".kind") : "dense";
        if (kind == "conv") l.kind = LayerSpec::Kind::Conv;
        else if (kind != "dense") throw UsageError("config: " + where + ".kind must be dense or conv");
        if (!v[i].contains("outputs")) throw UsageError("config: " + where + ".outputs is required");
        l.outputs = get_size(v[i]["outputs"], where + ".outputs");
        if (v[i].contains("width")) l.width = get_size(v[i]["width"], where + ".width");
        if (v[i].contains("stride")) l.stride = get_size(v[i]["stride"], where + ".stride");
        c.arch.push_back(l);
      }
    }
  }
  return c;
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw UsageError(what); };
  if (c.gamma && !(*c.gamma > 0.0 && std::isfinite(*c.gamma))) fail("--gamma must be positive and finite");
  if (!(c.gamma_quantile >= 0.0 && c.gamma_quantile < 1.0)) fail("gamma_quantile must lie in [0, 1)");
  if (c.eps && !(*c.eps > 0.0 && *c.eps <= 1.0)) fail("--eps must lie in (0, 1]");
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("--delta must lie in (0, 1)");
  if (c.eta && !(*c.eta > 0.0 && *c.eta < 1.0)) fail("--eta must lie in (0, 1)");
  if (!(c.zeta >= 0.0 && c.zeta < 1.0)) fail("--zeta must lie in [0, 1)");
  if (!(c.rel_norm > 0.0 && std::isfinite(c.rel_norm))) fail("--rel-norm must be positive");
  if (c.trials == 0) fail("--trials must be positive");
  if (c.scheme != "fc" && c.scheme != "conv" && c.scheme != "svd") fail("--scheme must be fc, conv or svd");
  if (c.out.empty()) fail("--out must not be empty");
  if (!(c.q_constant > 0.0)) fail("q_constant must be positive");
  if (!(c.svd_constant > 0.0)) fail("svd_constant must be positive");
  if (!(c.verify_scale > 0.0)) fail("verify_scale must be positive");
  if (c.dataset_format != "nsds" && c.dataset_format != "csv") fail("dataset.format must be nsds or csv");
  if (c.train.epochs == 0 || c.train.batch_size == 0) fail("train.epochs and train.batch_size must be positive");
  if (!(c.train.lr > 0.0)) fail("train.lr must be positive");
  for (const LayerSpec& l : c.arch) {
    if (l.outputs == 0 || l.width == 0 || l.stride == 0) fail("arch: outputs, width and stride must be positive");
  }
}

std::string config_hash(const ExperimentConfig& c) {
  ojson j = config_to_json(c);
  j.erase("out");
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig desk_mlp_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.count = 1000;
  c.synthetic.classes = 10;
  c.synthetic.features = 20;
  c.arch = {{LayerSpec::Kind::Dense, 64}, {LayerSpec::Kind::Dense, 64}, {LayerSpec::Kind::Dense, 64},
            {LayerSpec::Kind::Dense, 10}};
  c.train.epochs = 30;
  return c;
}

ExperimentConfig desk_conv_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.count = 1000;
  c.synthetic.classes = 10;
  c.synthetic.channels = 3;
  c.synthetic.size = 8;
  c.arch = {{LayerSpec::Kind::Conv, 16, 3, 1}, {LayerSpec::Kind::Conv, 16, 3, 1}, {LayerSpec::Kind::Dense, 10}};
  c.train.epochs = 30;
  c.scheme = "conv";
  return c;
}

ExperimentConfig smoke_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.synthetic.count = 300;
  c.synthetic.classes = 4;
  c.synthetic.features = 12;
  c.arch = {{LayerSpec::Kind::Dense, 32}, {LayerSpec::Kind::Dense, 32}, {LayerSpec::Kind::Dense, 4}};
  c.train.epochs = 15;
  c.trials = 50;
  c.jacobian_sample_cap = 32;
  c.smoothness_sample_cap = 32;
  return c;
}

}  // namespace nscomp
