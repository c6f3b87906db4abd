#include "nscomp/netlab/synthetic.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

Dataset make_blobs(const BlobConfig& config, const RngStream& stream) {
  if (config.count == 0 || config.classes == 0) throw UsageError("make_blobs: count and classes must be positive");
  const bool image = config.channels > 0;
  if (image && config.size == 0) throw UsageError("make_blobs: image size must be positive");
  if (!image && config.features == 0) throw UsageError("make_blobs: features must be positive");
  const std::size_t raw = image ? config.channels * config.size * config.size : config.features;

  Dataset data;
  data.classes = static_cast<std::uint32_t>(config.classes);
  data.input_shape = image ? Shape{config.channels + 1, config.size, config.size} : Shape::flat(raw + 1);

  std::vector<std::vector<double>> means;
  RngStream mean_stream = stream.derive(0);
  for (std::size_t c = 0; c < config.classes; ++c) {
    std::vector<double> m = sample_gaussian_vector(mean_stream, raw);
    const double n = norm2(m);
    for (double& v : m) v /= n;
    means.push_back(std::move(m));
  }

  const double noise_scale = config.spread / std::sqrt(static_cast<double>(raw));
  const std::size_t pixels = image ? config.size * config.size : 1;
  const double bias = 1.0 / std::sqrt(static_cast<double>(pixels));
  for (std::size_t r = 0; r < config.count; ++r) {
    const auto label = static_cast<std::uint32_t>(r % config.classes);
    RngStream s = stream.derive(r + 1);
    std::vector<double> x = sample_gaussian_vector(s, raw);
    for (std::size_t p = 0; p < raw; ++p) x[p] = means[label][p] + noise_scale * x[p];
    const double n = norm2(x);
    for (double& v : x) v /= n;
    x.resize(raw + pixels, bias);
    data.inputs.push_back(std::move(x));
    data.labels.push_back(label);
  }
  return data;
}

Dataset shuffle_labels(const Dataset& data, const RngStream& stream) {
  Dataset out = data;
  const std::vector<std::size_t> p = permutation(data.size(), stream);
  for (std::size_t r = 0; r < data.size(); ++r) out.labels[r] = data.labels[p[r]];
  return out;
}

}  // namespace nscomp
