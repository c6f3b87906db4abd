#include "nscomp/compressors/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

DenseMatrix SvdTruncation::product() const {
  if (rank == 0) return DenseMatrix(left.rows(), right.cols());
  return matmul(left, right);
}

SvdTruncation svd_truncate(const DenseMatrix& a, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("svd_truncate: delta must lie in (0, 1]");
  if (frobenius_norm(a) == 0.0) throw DegenerateError("svd_truncate: zero matrix");
  const Svd f = svd(a);
  SvdTruncation t;
  t.spectral = f.singular[0];
  const double cut = delta * t.spectral;
  while (t.rank < f.singular.size() && f.singular[t.rank] >= cut) ++t.rank;
  t.left = DenseMatrix(a.rows(), t.rank);
  t.right = DenseMatrix(t.rank, a.cols());
  for (std::size_t r = 0; r < t.rank; ++r) {
    for (std::size_t i = 0; i < a.rows(); ++i) t.left(i, r) = f.u(i, r) * f.singular[r];
    for (std::size_t j = 0; j < a.cols(); ++j) t.right(r, j) = f.v(j, r);
  }
  return t;
}

QuantizedParams quantize_params(std::span<const double> params, double nu) {
  if (!(nu > 0.0)) throw UsageError("quantize_params: nu must be positive");
  QuantizedParams q;
  q.values.resize(params.size());
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double steps = std::round(params[i] / nu);
    q.values[i] = steps * nu;
    if (i == 0 || steps < lo) lo = steps;
    if (i == 0 || steps > hi) hi = steps;
  }
  q.levels = params.empty() ? 1 : static_cast<std::size_t>(hi - lo) + 1;
  return q;
}

std::size_t matrix_project_k(double eps, double eta) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError("matrix_project: eps must lie in (0, 1]");
  if (!(eta > 0.0 && eta < 1.0)) throw UsageError("matrix_project: eta must lie in (0, 1)");
  const double k = std::ceil(std::log(1.0 / eta) / (eps * eps));
  if (!(k < 1e18)) throw SizeError("matrix_project: k overflows");
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

DenseMatrix matrix_project_reconstruct(std::span<const double> z, std::size_t rows, std::size_t cols,
                                       const RngStream& signs) {
  DenseMatrix out(rows, cols);
  kernels::project_reconstruct(z, signs, out.data());
  return out;
}

namespace {

// Per-entry covariance of one summand <A,M>M with +-1 entries is
// ||a||^2 I + a a^T - 2 diag(a^2); the mean of k summands is A plus that
// covariance over k. w_p = sqrt(||a||^2 - 2 a_p^2) g_p + a_p xi matches it.
DenseMatrix gaussian_limit_sample(const DenseMatrix& a, std::size_t k, double quant_var, const RngStream& stream) {
  const double norm_sq = dot(a.data(), a.data());
  const std::size_t n = a.size();
  const double xi = stream.normal(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  DenseMatrix out = a;
  std::vector<double> g(n), u(n);
  stream.fill_normals(0, g);
  stream.derive(1).fill_normals(0, u);
  for (std::size_t p = 0; p < n; ++p) {
    const double ap = a.data()[p];
    const double diag = norm_sq - 2.0 * ap * ap;
    if (diag < -1e-12 * norm_sq) {
      throw DegenerateError("matrix_project: one entry carries more than half of ||A||_F^2; "
                            "the Gaussian-limit sampler does not apply");
    }
    const double w = std::sqrt(std::max(0.0, diag)) * g[p] + ap * xi;
    // Rounding the k coefficients adds independent uniform errors of
    // variance nu^2/12 each, i.e. quant_var / k per entry after averaging.
    out.data()[p] += scale * (w + std::sqrt(quant_var) * u[p]);
  }
  return out;
}

}  // namespace

std::size_t matrix_project_levels(const DenseMatrix& a, double eps, std::size_t k) {
  const double fro = frobenius_norm(a);
  if (fro == 0.0) return 1;
  double l1 = 0.0;
  for (double v : a.data()) l1 += std::abs(v);
  const double grid = eps * fro / (2.0 * std::sqrt(static_cast<double>(a.size()) * static_cast<double>(k)));
  return 2 * static_cast<std::size_t>(std::ceil(l1 / grid)) + 1;
}

CompressedLayer matrix_project(const DenseMatrix& a, double eps, double eta, const HelperString& helper,
                               const MatrixProjectOptions& options) {
  const std::size_t k = options.k_override > 0 ? options.k_override : matrix_project_k(eps, eta);
  const std::size_t dim = a.size();
  const double fro = frobenius_norm(a);

  CompressedLayer out;
  out.scheme = Scheme::MatrixProject;
  out.helper = helper;
  out.layer_index = options.layer_index;
  out.k = k;
  out.param_count = k;
  const RngStream signs = helper.stream(options.layer_index);

  if (options.quantize && fro > 0.0) {
    out.grid = eps * fro / (2.0 * std::sqrt(static_cast<double>(dim) * static_cast<double>(k)));
    out.quantization_levels = matrix_project_levels(a, eps, k);
  }

  const double work = static_cast<double>(k) * static_cast<double>(dim);
  if (work > options.work_limit) {
    out.materialized = false;
    const double quant_var = out.grid * out.grid / 12.0;
    out.weights = DenseLayer{gaussian_limit_sample(a, k, quant_var, signs.derive(0x6C696D))};
    return out;
  }

  out.discrete_params.resize(k);
  kernels::project_coefficients(a.data(), signs, out.discrete_params);
  if (out.grid > 0.0) out.discrete_params = quantize_params(out.discrete_params, out.grid).values;
  out.weights = DenseLayer{matrix_project_reconstruct(out.discrete_params, a.rows(), a.cols(), signs)};
  return out;
}

}  // namespace nscomp
