#pragma once

#include <cstddef>

#include "nscomp/compressors/matrix.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

// Orthonormal basis (rows) of a uniformly random subspace of R^dim.
struct PwiseSubspace {
  DenseMatrix basis;  // r x dim
  std::size_t dim = 0;
  std::size_t rank() const { return basis.rows(); }
};

// Random subspace of dimension k*p. Throws SizeError when k*p > dim.
PwiseSubspace sample_pwise_subspace(std::size_t dim, std::size_t k, std::size_t p, const RngStream& stream);

struct ConvProjectOptions {
  double q_constant = 4.0;     // Q in k = Q ceil(width/stride)^2 p^2 / eps^2
  std::size_t k_override = 0;  // 0: formula
  std::size_t p_override = 0;  // 0: ceil(ln(1/eta))
  bool quantize = true;
  // When k*p exceeds the filter dimension, use the whole space (plain
  // Gaussian M') instead of failing.
  bool clamp_to_full_space = false;
  double work_limit = 5e8;
  std::size_t layer_index = 0;
};

std::size_t conv_project_p(double eta);
std::size_t conv_project_k(double eps, double eta, std::size_t width, std::size_t stride, double q_constant);

// Quantization level count for subspace rank r (r = dim in the full-space case).
std::size_t conv_project_levels(std::size_t dim, std::size_t r, double eps, std::size_t k);

// p-wise independent per-location compression of a conv filter. The result
// carries out_h * out_w filters (row-major over output pixels) and its
// discrete parameters are the coordinates of Proj_S(A).
CompressedLayer conv_project_pwise(const ConvFilter& a, double eps, double eta, std::size_t stride, std::size_t out_h,
                                   std::size_t out_w, const HelperString& helper,
                                   const ConvProjectOptions& options = {});

}  // namespace nscomp
