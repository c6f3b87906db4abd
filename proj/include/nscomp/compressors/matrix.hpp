#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nscomp/compressors/helper.hpp"
#include "nscomp/netlab/network.hpp"
#include "nscomp/numkit/tensor.hpp"

namespace nscomp {

// One compressed layer. `weights` holds the effective (reconstructed) weight;
// conv layers compressed per location carry one filter per output pixel in
// `local_filters` instead.
struct CompressedLayer {
  Scheme scheme = Scheme::MatrixProject;
  std::vector<double> discrete_params;
  std::size_t param_count = 0;          // q
  std::size_t quantization_levels = 1;  // r
  double grid = 0.0;                    // quantization step nu (0 = none)
  HelperString helper;
  std::size_t layer_index = 0;
  std::size_t k = 0;
  std::size_t p = 1;
  // False when the sampler ran in its Gaussian-limit mode; discrete_params is
  // then empty while param_count still reports q.
  bool materialized = true;
  Layer weights;
  std::vector<ConvFilter> local_filters;
};

struct SvdTruncation {
  DenseMatrix left;   // rows x rank, U_r diag(s_r)
  DenseMatrix right;  // rank x cols, V_r^T
  std::size_t rank = 0;
  double spectral = 0.0;  // ||A||_2

  DenseMatrix product() const;
};

// Drops singular values below delta * ||A||_2.
SvdTruncation svd_truncate(const DenseMatrix& a, double delta);

struct QuantizedParams {
  std::vector<double> values;
  std::size_t levels = 1;  // (max - min) / nu + 1 over the rounded values
};

// Rounds every value to the nearest multiple of nu.
QuantizedParams quantize_params(std::span<const double> params, double nu);

struct MatrixProjectOptions {
  std::size_t k_override = 0;  // 0: k = ceil(ln(1/eta) / eps^2)
  bool quantize = true;
  // Above this many sign draws (k * rows * cols) the Gaussian-limit sampler
  // replaces the explicit sum.
  double work_limit = 5e8;
  std::size_t layer_index = 0;
};

std::size_t matrix_project_k(double eps, double eta);

// Grid levels 2 ceil(||A||_1 / nu) + 1 for nu = eps ||A||_F / (2 sqrt(D k)),
// since every coefficient satisfies |<A, M_t>| <= ||A||_1.
std::size_t matrix_project_levels(const DenseMatrix& a, double eps, std::size_t k);

// A_hat = (1/k) sum_t <A, M_t> M_t with +-1 matrices M_t from the helper.
CompressedLayer matrix_project(const DenseMatrix& a, double eps, double eta, const HelperString& helper,
                               const MatrixProjectOptions& options = {});

// Exact reconstruction from coefficients: (1/k) sum_t z_t M_t.
DenseMatrix matrix_project_reconstruct(std::span<const double> z, std::size_t rows, std::size_t cols,
                                       const RngStream& signs);

}  // namespace nscomp
