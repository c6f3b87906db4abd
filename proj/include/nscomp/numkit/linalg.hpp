#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nscomp/numkit/rng.hpp"
#include "nscomp/numkit/tensor.hpp"

namespace nscomp {

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

double frobenius_norm(std::span<const double> entries);
double frobenius_norm(const DenseMatrix& a);
double frobenius_norm(const ConvFilter& a);
double frobenius_norm(const FeatureMap& a);

struct SpectralNormOptions {
  double tol = 1e-7;
  std::size_t max_iters = 10000;
  // Start vector is drawn from this stream, so the estimate is reproducible.
  RngStream start{0x5EC7A1, 0};
};

// Largest singular value via power iteration on A^T A. Throws
// ConvergenceError (carrying the last iterate) when max_iters is exhausted.
double spectral_norm(const DenseMatrix& a, const SpectralNormOptions& options = {});

struct Svd {
  DenseMatrix u;                  // rows x r, orthonormal columns
  std::vector<double> singular;   // r = min(rows, cols), non-increasing
  DenseMatrix v;                  // cols x r, orthonormal columns
};

inline constexpr std::size_t kSvdMaxDim = 512;

// One-sided Jacobi SVD. Throws SizeError when rows or cols exceed kSvdMaxDim.
Svd svd(const DenseMatrix& a);

// U diag(s) V^T using the first `rank` triplets.
DenseMatrix reconstruct(const Svd& f, std::size_t rank);

// ||A||_F^2 / ||A||_2^2. Throws DegenerateError for the zero matrix.
double stable_rank(const DenseMatrix& a);

DenseMatrix sample_gaussian(RngStream& stream, std::size_t rows, std::size_t cols);
ConvFilter sample_gaussian(RngStream& stream, std::size_t out_channels, std::size_t in_channels, std::size_t width);
std::vector<double> sample_gaussian_vector(RngStream& stream, std::size_t n);
DenseMatrix sample_sign(RngStream& stream, std::size_t rows, std::size_t cols);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);

// Orthonormalizes the columns of `a` in place (modified Gram-Schmidt, two
// passes). Throws DegenerateError when the columns are numerically dependent.
void orthonormalize_columns(DenseMatrix& a);
// Same, on the rows of `a` (cache-friendly for wide bases).
void orthonormalize_rows(DenseMatrix& a);

}  // namespace nscomp
