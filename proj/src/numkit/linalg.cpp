#include "nscomp/numkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"

namespace nscomp {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(std::span<const double> entries) { return norm2(entries); }
double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }
double frobenius_norm(const ConvFilter& a) { return norm2(a.data()); }
double frobenius_norm(const FeatureMap& a) { return norm2(a.data()); }

double spectral_norm(const DenseMatrix& a, const SpectralNormOptions& options) {
  if (!(options.tol > 0.0)) throw UsageError("spectral_norm: tol must be positive");
  if (a.empty()) return 0.0;
  if (frobenius_norm(a) == 0.0) return 0.0;

  RngStream start = options.start;
  std::vector<double> v = sample_gaussian_vector(start, a.cols());
  std::vector<double> av(a.rows());
  std::vector<double> w(a.cols());

  double sigma = 0.0;
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    const double vn = norm2(v);
    if (vn == 0.0) throw DegenerateError("spectral_norm: iterate collapsed to zero");
    for (double& x : v) x /= vn;
    kernels::gemv(a, v, av);
    kernels::gemv_t(a, av, w);
    // Rayleigh quotient of A^T A at v.
    const double next = std::sqrt(std::max(0.0, dot(v, w)));
    // The Rayleigh quotient converges quadratically faster than the iterate;
    // a much tighter step criterion keeps the final error below tol.
    if (it > 1 && std::abs(next - sigma) <= 1e-3 * options.tol * next) return next;
    sigma = next;
    v.swap(w);
  }
  throw ConvergenceError("spectral_norm: no convergence within " + std::to_string(options.max_iters) +
                             " iterations",
                         sigma, options.max_iters);
}

namespace {

// One-sided Jacobi on the columns of `w` (m x n, m >= n). On return the
// columns of w are U*diag(s) and v holds the accumulated rotations.
void jacobi_sweeps(DenseMatrix& w, DenseMatrix& v) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
}

// Fills zero columns of `u` (those with zero singular value) with an
// orthonormal completion so U always has orthonormal columns.
void complete_basis(DenseMatrix& u, const std::vector<double>& s) {
  const std::size_t m = u.rows();
  for (std::size_t col = 0; col < u.cols(); ++col) {
    if (s[col] > 0.0) continue;
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<double> cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t other = 0; other < u.cols(); ++other) {
          if (other == col || (s[other] == 0.0 && other > col)) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += u(i, other) * cand[i];
          for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, other);
        }
      }
      const double n = norm2(cand);
      if (n > 0.5) {
        for (std::size_t i = 0; i < m; ++i) u(i, col) = cand[i] / n;
        break;
      }
    }
  }
}

Svd svd_tall(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  DenseMatrix w = a;
  DenseMatrix v = DenseMatrix::identity(n);
  jacobi_sweeps(w, v);

  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += w(i, j) * w(i, j);
    s[j] = std::sqrt(ss);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });

  const double smax = n > 0 ? s[order[0]] : 0.0;
  Svd out{DenseMatrix(m, n), std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    // Columns that are numerically zero carry no direction; treat them as exact zeros.
    const double sk = s[j] <= 1e-300 || s[j] <= smax * 1e-15 ? 0.0 : s[j];
    out.singular[k] = sk;
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = sk > 0.0 ? w(i, j) / sk : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
  }
  complete_basis(out.u, out.singular);
  return out;
}

}  // namespace

Svd svd(const DenseMatrix& a) {
  if (a.rows() > kSvdMaxDim || a.cols() > kSvdMaxDim) {
    throw SizeError("svd: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " exceeds the " +
                    std::to_string(kSvdMaxDim) + " dimension cap");
  }
  if (a.rows() >= a.cols()) return svd_tall(a);
  Svd t = svd_tall(a.transpose());
  return Svd{std::move(t.v), std::move(t.singular), std::move(t.u)};
}

DenseMatrix reconstruct(const Svd& f, std::size_t rank) {
  rank = std::min(rank, f.singular.size());
  DenseMatrix out(f.u.rows(), f.v.rows());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < rank; ++k) {
      const double us = f.u(i, k) * f.singular[k];
      if (us == 0.0) continue;
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += us * f.v(j, k);
    }
  return out;
}

double stable_rank(const DenseMatrix& a) {
  const double fro = frobenius_norm(a);
  if (fro == 0.0) throw DegenerateError("stable_rank: zero matrix");
  // Jacobi singular values are accurate to machine precision; power
  // iteration only to its tolerance.
  const double spec = (a.rows() <= kSvdMaxDim && a.cols() <= kSvdMaxDim) ? svd(a).singular[0] : spectral_norm(a);
  return std::max(1.0, fro * fro / (spec * spec));
}

DenseMatrix sample_gaussian(RngStream& stream, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = stream.next_normal();
  return m;
}

ConvFilter sample_gaussian(RngStream& stream, std::size_t out_channels, std::size_t in_channels,
                           std::size_t width) {
  ConvFilter f(out_channels, in_channels, width);
  for (double& x : f.data()) x = stream.next_normal();
  return f;
}

std::vector<double> sample_gaussian_vector(RngStream& stream, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = stream.next_normal();
  return v;
}

DenseMatrix sample_sign(RngStream& stream, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = stream.next_sign();
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  kernels::gemm(a, b, c);
  return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  std::vector<double> y(a.rows());
  kernels::gemv(a, x, y);
  return y;
}

void orthonormalize_rows(DenseMatrix& a) {
  const std::size_t n = a.rows();
  if (n > a.cols()) throw DegenerateError("orthonormalize_rows: more rows than columns");
  for (std::size_t j = 0; j < n; ++j) {
    std::span<double> row = a.row(j);
    const double original = norm2(row);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        std::span<const double> prev = a.row(k);
        const double proj = dot(prev, row);
        for (std::size_t i = 0; i < row.size(); ++i) row[i] -= proj * prev[i];
      }
    }
    const double n2 = norm2(row);
    if (!(n2 > 1e-10 * original) || n2 == 0.0) {
      throw DegenerateError("orthonormalize_rows: row " + std::to_string(j) + " is linearly dependent");
    }
    for (double& x : row) x /= n2;
  }
}

void orthonormalize_columns(DenseMatrix& a) {
  DenseMatrix t = a.transpose();
  orthonormalize_rows(t);
  a = t.transpose();
}

}  // namespace nscomp
