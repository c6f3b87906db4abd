#include "nscomp/compressors/vector.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::SvdTruncate: return "svd";
    case Scheme::MatrixProject: return "matrix_project";
    case Scheme::ConvPwiseProject: return "conv_pwise_project";
    case Scheme::VectorCompress: return "vector_compress";
    case Scheme::VectorProject: return "vector_project";
  }
  return "unknown";
}

namespace {

void check_unit_ball(std::span<const double> c, const char* who) {
  if (norm2(c) > 1.0 + 1e-12) throw UsageError(std::string(who) + ": input vector must satisfy ||c|| <= 1");
}

}  // namespace

VectorCompressResult vector_compress(std::span<const double> c, double gamma, double eta, const RngStream& stream) {
  if (!(gamma > 0.0)) throw UsageError("vector_compress: gamma must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw UsageError("vector_compress: eta must lie in (0, 1]");
  check_unit_ball(c, "vector_compress");
  VectorCompressResult out;
  out.c_hat.assign(c.size(), 0.0);
  out.probabilities.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double p = std::min(1.0, 2.0 * c[i] * c[i] / (eta * gamma * gamma));
    out.probabilities[i] = p;
    if (p > 0.0 && stream.uniform(i) < p) {
      out.c_hat[i] = c[i] / p;
      ++out.nonzeros;
    }
  }
  return out;
}

std::vector<double> vector_discretize(std::span<const double> c_tilde, double gamma, std::size_t h) {
  if (!(gamma > 0.0)) throw UsageError("vector_discretize: gamma must be positive");
  if (h == 0) throw UsageError("vector_discretize: h must be positive");
  const double root_h = std::sqrt(static_cast<double>(h));
  const double grid = gamma / (2.0 * root_h);
  const double cutoff = gamma / (4.0 * root_h);
  std::vector<double> out(c_tilde.size(), 0.0);
  for (std::size_t i = 0; i < c_tilde.size(); ++i) {
    if (std::abs(c_tilde[i]) < cutoff) continue;
    out[i] = std::round(c_tilde[i] / grid) * grid;
  }
  return out;
}

std::size_t vector_project_k(double gamma, double eta) {
  if (!(gamma > 0.0)) throw UsageError("vector_project: gamma must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("vector_project: eta must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(16.0 * std::log(1.0 / eta) / (gamma * gamma)));
}

VectorProjectResult vector_project(std::span<const double> c, double gamma, double eta, const HelperString& helper,
                                   bool round_coefficients) {
  check_unit_ball(c, "vector_project");
  VectorProjectResult out;
  out.k = vector_project_k(gamma, eta);
  const std::size_t h = c.size();
  const RngStream v = helper.stream(0);
  out.z.resize(out.k);
  // v_i(p) = v.normal(i * h + p).
  kernels::parallel_for(out.k, [&](std::size_t i) {
    std::vector<double> row(h);
    v.fill_normals(i * h, row);
    out.z[i] = dot(row, c);
  });
  if (round_coefficients) {
    const double grid = gamma / (2.0 * std::sqrt(static_cast<double>(h * out.k)));
    for (double& zi : out.z) zi = std::round(zi / grid) * grid;
  }
  out.c_hat.assign(h, 0.0);
  std::vector<double> row(h);
  for (std::size_t i = 0; i < out.k; ++i) {
    v.fill_normals(i * h, row);
    for (std::size_t p = 0; p < h; ++p) out.c_hat[p] += out.z[i] * row[p];
  }
  for (double& x : out.c_hat) x /= static_cast<double>(out.k);
  return out;
}

}  // namespace nscomp
