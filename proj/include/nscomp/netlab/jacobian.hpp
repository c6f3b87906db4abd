#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nscomp/netlab/network.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

inline constexpr std::size_t kExplicitJacobianLimit = 10'000'000;

// J^{i,j} at a traced input: A^j D^{j-1} ... A^{i+1} D^i with D^0 = I.
// The explicit matrix is filled only when rows*cols <= the limit passed to
// jacobian(); otherwise use apply_jacobian. Holds a pointer to the network,
// which must outlive the view.
struct JacobianView {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  DenseMatrix explicit_matrix;
  const Network* net = nullptr;
  std::vector<std::vector<std::uint8_t>> masks;  // masks[k - from] = D^k, k in [from, to)

  bool has_explicit() const { return !explicit_matrix.empty() || rows * cols == 0; }
};

JacobianView jacobian(const Network& net, const ActivationTrace& trace, std::size_t i, std::size_t j,
                      std::size_t explicit_limit = kExplicitJacobianLimit);

// J v through the mask-and-multiply chain (never materializes J).
std::vector<double> apply_jacobian(const JacobianView& jac, std::span<const double> v);

// ||J||_F: exact from the explicit matrix, else a Hutchinson estimate
// E||J g||^2 over `probes` Gaussian probes drawn from `stream`.
double jacobian_frobenius(const JacobianView& jac, std::size_t probes = 64, RngStream stream = RngStream(0x4A4C, 0));

}  // namespace nscomp
