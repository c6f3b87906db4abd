#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"

namespace nscomp::kernels {

namespace {
int g_thread_cap = 0;
}  // namespace

void set_thread_cap(int threads) {
  g_thread_cap = std::max(0, threads);
  if (g_thread_cap > 0) omp_set_num_threads(g_thread_cap);
}

void apply_env_thread_cap() {
  if (const char* env = std::getenv("NS_THREADS")) {
    try {
      set_thread_cap(std::stoi(env));
    } catch (const std::exception&) {
      // Unparseable values leave the runtime default in place.
    }
  }
}

int thread_cap() { return g_thread_cap > 0 ? g_thread_cap : omp_get_max_threads(); }

}  // namespace nscomp::kernels

namespace nscomp::kernels::omp {

namespace {

constexpr std::size_t kChunk = 2048;

inline std::ptrdiff_t as_signed(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

void gemv(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = a.cols();
#pragma omp parallel for schedule(static) if (a.size() > 20000)
  for (std::ptrdiff_t r = 0; r < as_signed(a.rows()); ++r) {
    const double* row = a.data().data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

void gemv_t(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = a.cols();
  const std::size_t rows = a.rows();
  // Column blocks keep the row-major walk contiguous inside each block.
  const std::size_t blocks = (cols + 63) / 64;
#pragma omp parallel for schedule(static) if (a.size() > 20000)
  for (std::ptrdiff_t blk = 0; blk < as_signed(blocks); ++blk) {
    const std::size_t c0 = blk * 64;
    const std::size_t c1 = std::min(cols, c0 + 64);
    for (std::size_t c = c0; c < c1; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = a.data().data() + r * cols;
      for (std::size_t c = c0; c < c1; ++c) y[c] += row[c] * x[r];
    }
  }
}

void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) throw ShapeError("gemm: shape mismatch");
  const std::size_t n = b.cols();
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() * n > 100000)
  for (std::ptrdiff_t i = 0; i < as_signed(a.rows()); ++i) {
    double* ci = c.data().data() + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* bk = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

namespace {

inline double patch_dot(const ConvFilter& f, std::size_t o, std::size_t stride, Shape in,
                        std::span<const double> x, std::size_t a, std::size_t b) {
  const std::size_t w = f.width();
  double s = 0.0;
  for (std::size_t c = 0; c < f.in_channels(); ++c)
    for (std::size_t u = 0; u < w; ++u) {
      const double* xr = x.data() + (c * in.height + stride * a + u) * in.width + stride * b;
      const double* fr = f.data().data() + ((o * f.in_channels() + c) * w + u) * w;
      for (std::size_t v = 0; v < w; ++v) s += fr[v] * xr[v];
    }
  return s;
}

}  // namespace

void conv_forward(const ConvFilter& f, std::size_t stride, Shape in, std::span<const double> x,
                  std::span<double> y) {
  const std::size_t o1 = conv_out_size(in.height, f.width(), stride);
  const std::size_t o2 = conv_out_size(in.width, f.width(), stride);
  const std::size_t rows = f.out_channels() * o1;
#pragma omp parallel for schedule(static) if (rows * o2 * f.size() > 100000)
  for (std::ptrdiff_t ra = 0; ra < as_signed(rows); ++ra) {
    const std::size_t o = ra / o1, a = ra % o1;
    for (std::size_t b = 0; b < o2; ++b) y[ra * o2 + b] = patch_dot(f, o, stride, in, x, a, b);
  }
}

void conv_forward_local(std::span<const ConvFilter> filters, std::size_t stride, Shape in,
                        std::span<const double> x, std::span<double> y) {
  const ConvFilter& f0 = filters[0];
  const std::size_t o1 = conv_out_size(in.height, f0.width(), stride);
  const std::size_t o2 = conv_out_size(in.width, f0.width(), stride);
  const std::size_t rows = f0.out_channels() * o1;
#pragma omp parallel for schedule(static) if (rows * o2 * f0.size() > 100000)
  for (std::ptrdiff_t ra = 0; ra < as_signed(rows); ++ra) {
    const std::size_t o = ra / o1, a = ra % o1;
    for (std::size_t b = 0; b < o2; ++b) y[ra * o2 + b] = patch_dot(filters[a * o2 + b], o, stride, in, x, a, b);
  }
}

void project_coefficients(std::span<const double> a, const RngStream& helper, std::span<double> z) {
  const std::size_t dim = a.size();
#pragma omp parallel if (z.size() * dim > 50000)
  {
    std::vector<double> signs(std::min(dim, kChunk));
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < as_signed(z.size()); ++t) {
      double s = 0.0;
      for (std::size_t p0 = 0; p0 < dim; p0 += kChunk) {
        const std::size_t len = std::min(kChunk, dim - p0);
        helper.fill_signs(t * dim + p0, {signs.data(), len});
        for (std::size_t q = 0; q < len; ++q) s += a[p0 + q] * signs[q];
      }
      z[t] = s;
    }
  }
}

void project_reconstruct(std::span<const double> z, const RngStream& helper, std::span<double> out) {
  const std::size_t dim = out.size();
  const std::size_t chunks = (dim + kChunk - 1) / kChunk;
  const double inv_k = 1.0 / static_cast<double>(z.size());
#pragma omp parallel if (z.size() * dim > 50000)
  {
    std::vector<double> signs(std::min(dim, kChunk));
#pragma omp for schedule(static)
    for (std::ptrdiff_t ch = 0; ch < as_signed(chunks); ++ch) {
      const std::size_t p0 = ch * kChunk;
      const std::size_t len = std::min(kChunk, dim - p0);
      for (std::size_t q = 0; q < len; ++q) out[p0 + q] = 0.0;
      for (std::size_t t = 0; t < z.size(); ++t) {
        helper.fill_signs(t * dim + p0, {signs.data(), len});
        for (std::size_t q = 0; q < len; ++q) out[p0 + q] += z[t] * signs[q];
      }
      for (std::size_t q = 0; q < len; ++q) out[p0 + q] *= inv_k;
    }
  }
}

}  // namespace nscomp::kernels::omp
