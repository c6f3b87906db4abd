#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"

namespace nscomp::kernels::serial {

void gemv(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * x[c];
    y[r] = s;
  }
}

void gemv_t(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t c = 0; c < a.cols(); ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += a(r, c) * x[r];
}

void gemm(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) throw ShapeError("gemm: shape mismatch");
  for (double& v : c.data()) v = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
}

void conv_forward(const ConvFilter& f, std::size_t stride, Shape in, std::span<const double> x,
                  std::span<double> y) {
  const std::size_t w = f.width();
  const std::size_t o1 = conv_out_size(in.height, w, stride);
  const std::size_t o2 = conv_out_size(in.width, w, stride);
  for (std::size_t o = 0; o < f.out_channels(); ++o)
    for (std::size_t a = 0; a < o1; ++a)
      for (std::size_t b = 0; b < o2; ++b) {
        double s = 0.0;
        for (std::size_t c = 0; c < f.in_channels(); ++c)
          for (std::size_t u = 0; u < w; ++u)
            for (std::size_t v = 0; v < w; ++v)
              s += f(o, c, u, v) * x[(c * in.height + stride * a + u) * in.width + stride * b + v];
        y[(o * o1 + a) * o2 + b] = s;
      }
}

void conv_forward_local(std::span<const ConvFilter> filters, std::size_t stride, Shape in,
                        std::span<const double> x, std::span<double> y) {
  const ConvFilter& f0 = filters[0];
  const std::size_t w = f0.width();
  const std::size_t o1 = conv_out_size(in.height, w, stride);
  const std::size_t o2 = conv_out_size(in.width, w, stride);
  for (std::size_t o = 0; o < f0.out_channels(); ++o)
    for (std::size_t a = 0; a < o1; ++a)
      for (std::size_t b = 0; b < o2; ++b) {
        const ConvFilter& f = filters[a * o2 + b];
        double s = 0.0;
        for (std::size_t c = 0; c < f.in_channels(); ++c)
          for (std::size_t u = 0; u < w; ++u)
            for (std::size_t v = 0; v < w; ++v)
              s += f(o, c, u, v) * x[(c * in.height + stride * a + u) * in.width + stride * b + v];
        y[(o * o1 + a) * o2 + b] = s;
      }
}

void project_coefficients(std::span<const double> a, const RngStream& helper, std::span<double> z) {
  const std::size_t dim = a.size();
  for (std::size_t t = 0; t < z.size(); ++t) {
    double s = 0.0;
    for (std::size_t p = 0; p < dim; ++p) s += a[p] * helper.sign(t * dim + p);
    z[t] = s;
  }
}

void project_reconstruct(std::span<const double> z, const RngStream& helper, std::span<double> out) {
  const std::size_t dim = out.size();
  for (double& v : out) v = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t)
    for (std::size_t p = 0; p < dim; ++p) out[p] += z[t] * helper.sign(t * dim + p);
  const double inv_k = 1.0 / static_cast<double>(z.size());
  for (double& v : out) v *= inv_k;
}

}  // namespace nscomp::kernels::serial
