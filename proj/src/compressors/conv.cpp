#include "nscomp/compressors/conv.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

PwiseSubspace sample_pwise_subspace(std::size_t dim, std::size_t k, std::size_t p, const RngStream& stream) {
  if (k == 0 || p == 0) throw UsageError("sample_pwise_subspace: k and p must be positive");
  if (k > dim || k * p > dim) {
    throw SizeError("sample_pwise_subspace: k*p = " + std::to_string(k) + "*" + std::to_string(p) +
                    " exceeds the ambient dimension " + std::to_string(dim));
  }
  RngStream s = stream;
  PwiseSubspace out;
  out.dim = dim;
  out.basis = sample_gaussian(s, k * p, dim);
  orthonormalize_rows(out.basis);
  return out;
}

std::size_t conv_project_p(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("conv_project: eta must lie in (0, 1)");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log(1.0 / eta))));
}

std::size_t conv_project_k(double eps, double eta, std::size_t width, std::size_t stride, double q_constant) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError("conv_project: eps must lie in (0, 1]");
  if (stride == 0) throw UsageError("conv_project: stride must be positive");
  const double span = std::ceil(static_cast<double>(width) / static_cast<double>(stride));
  const double p = static_cast<double>(conv_project_p(eta));
  const double k = std::ceil(q_constant * span * span * p * p / (eps * eps));
  if (!(k < 1e15)) throw SizeError("conv_project: k overflows");
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

std::size_t conv_project_levels(std::size_t dim, std::size_t r, double eps, std::size_t k) {
  // ||a_S|| <= ||A||_F bounds every coordinate, and ||A||_F / grid = 2 D sqrt(k) / (eps sqrt(r)).
  const double ratio = 2.0 * static_cast<double>(dim) * std::sqrt(static_cast<double>(k)) /
                       (eps * std::sqrt(static_cast<double>(r)));
  return 2 * static_cast<std::size_t>(std::ceil(ratio)) + 1;
}

CompressedLayer conv_project_pwise(const ConvFilter& a, double eps, double eta, std::size_t stride, std::size_t out_h,
                                   std::size_t out_w, const HelperString& helper,
                                   const ConvProjectOptions& options) {
  const std::size_t p = options.p_override > 0 ? options.p_override : conv_project_p(eta);
  const std::size_t k =
      options.k_override > 0 ? options.k_override : conv_project_k(eps, eta, a.width(), stride, options.q_constant);
  const std::size_t dim = a.size();
  const std::size_t locations = out_h * out_w;
  if (locations == 0) throw UsageError("conv_project: no output locations");
  const RngStream base = helper.stream(options.layer_index);

  // Subspace coordinates: M' = c Q^T w with w ~ N(0, I_r), since Q M is
  // exactly standard Gaussian for orthonormal rows Q.
  const bool full = options.clamp_to_full_space && (k > dim || k * p > dim);
  DenseMatrix basis;
  std::size_t r = 0;
  if (full) {
    r = dim;
  } else {
    basis = sample_pwise_subspace(dim, k, p, base.derive(0)).basis;
    r = k * p;
  }
  const double c2 = static_cast<double>(dim) / static_cast<double>(r);

  std::vector<double> a_s(r);
  if (full) {
    std::copy(a.data().begin(), a.data().end(), a_s.begin());
  } else {
    kernels::gemv(basis, a.data(), a_s);
  }

  CompressedLayer out;
  out.scheme = Scheme::ConvPwiseProject;
  out.helper = helper;
  out.layer_index = options.layer_index;
  out.k = k;
  out.p = p;
  out.param_count = r;
  const double fro = frobenius_norm(a);
  if (options.quantize && fro > 0.0) {
    // Keeps the reconstruction error from rounding below eps ||A||_F / (4 sqrt(k)).
    out.grid = eps * fro * std::sqrt(static_cast<double>(r)) /
               (2.0 * static_cast<double>(dim) * std::sqrt(static_cast<double>(k)));
    out.quantization_levels = conv_project_levels(dim, r, eps, k);
    a_s = quantize_params(a_s, out.grid).values;
  }
  out.discrete_params = a_s;

  const double as_norm_sq = dot(a_s, a_s);
  const double work = static_cast<double>(locations) * static_cast<double>(k) * static_cast<double>(r) * 2.0;
  const bool limit = work > options.work_limit;
  out.materialized = !limit;
  const RngStream draws = base.derive(1);

  out.local_filters.assign(locations, ConvFilter(a.out_channels(), a.in_channels(), a.width()));
  kernels::parallel_for(locations, [&](std::size_t loc) {
    // b = (c^2 / k) sum_t <a_S, w_t> w_t, or its Gaussian limit
    // c^2 (a_S + (||a_S|| g + a_S xi) / sqrt(k)).
    std::vector<double> b(r, 0.0);
    if (limit) {
      const RngStream s = draws.derive(loc);
      std::vector<double> g(r);
      s.fill_normals(0, g);
      const double xi = s.normal(r);
      const double scale = 1.0 / std::sqrt(static_cast<double>(k));
      const double an = std::sqrt(as_norm_sq);
      for (std::size_t i = 0; i < r; ++i) b[i] = c2 * (a_s[i] + scale * (an * g[i] + a_s[i] * xi));
    } else {
      std::vector<double> w(r);
      for (std::size_t t = 0; t < k; ++t) {
        draws.fill_normals((static_cast<std::uint64_t>(loc) * k + t) * r, w);
        const double coef = dot(a_s, w);
        for (std::size_t i = 0; i < r; ++i) b[i] += coef * w[i];
      }
      for (double& v : b) v *= c2 / static_cast<double>(k);
    }
    std::span<double> f = out.local_filters[loc].data();
    if (full) {
      std::copy(b.begin(), b.end(), f.begin());
    } else {
      kernels::serial::gemv_t(basis, b, f);
    }
  });

  // Shared-filter view: the mean of the per-location filters.
  ConvFilter mean(a.out_channels(), a.in_channels(), a.width());
  for (const ConvFilter& f : out.local_filters)
    for (std::size_t i = 0; i < dim; ++i) mean.data()[i] += f.data()[i] / static_cast<double>(locations);
  out.weights = ConvLayer{std::move(mean), stride};
  return out;
}

}  // namespace nscomp
