#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include "nscomp/numkit/rng.hpp"
#include "nscomp/numkit/tensor.hpp"

// Hot loops in two flavours. `serial` is the plain reference; `omp` splits the
// outer loop across threads. Both compute every output element with the same
// inner summation order, so they agree bit for bit for any thread count.
namespace nscomp::kernels {

// Caps the OpenMP team size (0 = runtime default). Reads NS_THREADS when
// called with no argument.
void set_thread_cap(int threads);
void apply_env_thread_cap();
int thread_cap();

#define NSCOMP_KERNEL_DECLS                                                                                   \
  /* y = A x */                                                                                               \
  void gemv(const DenseMatrix& a, std::span<const double> x, std::span<double> y);                            \
  /* y = A^T x */                                                                                             \
  void gemv_t(const DenseMatrix& a, std::span<const double> x, std::span<double> y);                          \
  /* c = a b; c must be pre-sized */                                                                          \
  void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);                                      \
  /* Valid strided convolution of x (shape `in`) into y (out_ch x n1' x n2'). */                              \
  void conv_forward(const ConvFilter& f, std::size_t stride, Shape in, std::span<const double> x,             \
                    std::span<double> y);                                                                     \
  /* Same, with a separate filter per output location (row-major over (a, b)). */                             \
  void conv_forward_local(std::span<const ConvFilter> filters, std::size_t stride, Shape in,                  \
                          std::span<const double> x, std::span<double> y);                                    \
  /* z[t] = <a, M_t> with M_t(p) = helper.sign(t * a.size() + p). */                                          \
  void project_coefficients(std::span<const double> a, const RngStream& helper, std::span<double> z);         \
  /* out[p] = (1/k) sum_t z[t] M_t(p), k = z.size(). */                                                       \
  void project_reconstruct(std::span<const double> z, const RngStream& helper, std::span<double> out);

namespace serial {
NSCOMP_KERNEL_DECLS
}  // namespace serial

namespace omp {
NSCOMP_KERNEL_DECLS
}  // namespace omp

#undef NSCOMP_KERNEL_DECLS

using omp::conv_forward;
using omp::conv_forward_local;
using omp::gemm;
using omp::gemv;
using omp::gemv_t;
using omp::project_coefficients;
using omp::project_reconstruct;

// Output spatial size of a valid convolution.
inline std::size_t conv_out_size(std::size_t n, std::size_t width, std::size_t stride) {
  return (n - width) / stride + 1;
}

// Runs body(i) for i in [0, n). Each index must write only its own outputs.
// The first exception thrown by any index is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(nscomp_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

template <class Body>
void serial_for(std::size_t n, Body&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace nscomp::kernels
