#include "nscomp/cli/model_io.hpp"

#include <cmath>
#include <json.hpp>

#include "nscomp/cli/fileio.hpp"
#include "nscomp/error.hpp"

namespace nscomp {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError("model " + path + ": " + what);
}

const json& member(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing");
  return *it;
}

std::size_t as_size(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> size_list(const json& v, const std::string& path, std::size_t n) {
  if (!v.is_array() || v.size() != n) fail(path, "expected an array of " + std::to_string(n) + " integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(as_size(v[i], path + "/" + std::to_string(i)));
  return out;
}

std::vector<double> weights(const json& v, const std::string& path, std::size_t expected) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  if (v.size() != expected) {
    fail(path, "expected " + std::to_string(expected) + " weights, found " + std::to_string(v.size()));
  }
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!v[i].is_number()) fail(path + "/" + std::to_string(i), "expected a number");
    out[i] = v[i].get<double>();
    if (!std::isfinite(out[i])) fail(path + "/" + std::to_string(i), "non-finite weight");
  }
  return out;
}

}  // namespace

std::string model_to_json(const Network& net, const std::optional<TrainingMeta>& meta) {
  json j;
  j["format_version"] = kModelFormatVersion;
  const Shape in = net.input_shape();
  j["input_shape"] = {in.channels, in.height, in.width};
  json layers = json::array();
  for (const Layer& l : net.layers()) {
    json e;
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      e["kind"] = "dense";
      e["shape"] = {d->weights.rows(), d->weights.cols()};
      e["weights"] = d->weights.values();
    } else {
      const auto& c = std::get<ConvLayer>(l);
      e["kind"] = "conv";
      e["shape"] = {c.filter.out_channels(), c.filter.in_channels(), c.filter.width(), c.filter.width()};
      e["stride"] = c.stride;
      e["weights"] = c.filter.values();
    }
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  if (meta) j["training"] = {{"seed", meta->seed}, {"epochs", meta->epochs}, {"accuracy", meta->accuracy}};
  return j.dump(1) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("model: malformed JSON at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
  const json& version = member(j, "", "format_version");
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion) {
    fail("/format_version", "unsupported version " + version.dump() + " (expected " +
                                std::to_string(kModelFormatVersion) + ")");
  }
  const auto in = size_list(member(j, "", "input_shape"), "/input_shape", 3);
  const json& layers = member(j, "", "layers");
  if (!layers.is_array() || layers.empty()) fail("/layers", "expected a non-empty array");

  std::vector<Layer> out;
  Shape shape{in[0], in[1], in[2]};
  if (shape.size() == 0) fail("/input_shape", "empty input");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string path = "/layers/" + std::to_string(i);
    const json& kind = member(layers[i], path, "kind");
    if (!kind.is_string()) fail(path + "/kind", "expected a string");
    Layer layer;
    if (kind == "dense") {
      const auto s = size_list(member(layers[i], path, "shape"), path + "/shape", 2);
      layer = DenseLayer{DenseMatrix(s[0], s[1], weights(member(layers[i], path, "weights"), path + "/weights",
                                                         s[0] * s[1]))};
    } else if (kind == "conv") {
      const auto s = size_list(member(layers[i], path, "shape"), path + "/shape", 4);
      if (s[2] != s[3]) fail(path + "/shape", "only square filters are supported");
      const std::size_t stride = as_size(member(layers[i], path, "stride"), path + "/stride");
      if (stride == 0) fail(path + "/stride", "stride must be positive");
      layer = ConvLayer{ConvFilter(s[0], s[1], s[2],
                                   weights(member(layers[i], path, "weights"), path + "/weights",
                                           s[0] * s[1] * s[2] * s[3])),
                        stride};
    } else {
      fail(path + "/kind", "unknown layer kind " + kind.dump());
    }
    try {
      shape = layer_output_shape(layer, shape);
    } catch (const ShapeError& e) {
      throw ShapeError("model: layer " + std::to_string(i + 1) + " does not compose with its input: " + e.what());
    }
    out.push_back(std::move(layer));
  }

  ModelFile f{Network(Shape{in[0], in[1], in[2]}, std::move(out)), std::nullopt};
  if (auto it = j.find("training"); it != j.end()) {
    TrainingMeta m;
    m.seed = member(*it, "/training", "seed").get<std::uint64_t>();
    m.epochs = as_size(member(*it, "/training", "epochs"), "/training/epochs");
    m.accuracy = member(*it, "/training", "accuracy").get<double>();
    f.training = m;
  }
  return f;
}

void save_model(const Network& net, const std::string& path, const std::optional<TrainingMeta>& meta) {
  write_file_atomic(path, model_to_json(net, meta));
}

ModelFile load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace nscomp
