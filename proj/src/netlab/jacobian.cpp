#include "nscomp/netlab/jacobian.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

JacobianView jacobian(const Network& net, const ActivationTrace& trace, std::size_t i, std::size_t j,
                      std::size_t explicit_limit) {
  if (i > j) throw ShapeError("jacobian: from-layer " + std::to_string(i) + " exceeds to-layer " + std::to_string(j));
  if (j > net.depth()) throw ShapeError("jacobian: to-layer beyond network depth");
  if (trace.depth() != net.depth()) throw ShapeError("jacobian: trace does not belong to this network");

  JacobianView jac;
  jac.from = i;
  jac.to = j;
  jac.rows = net.shape(j).size();
  jac.cols = net.shape(i).size();
  jac.net = &net;
  for (std::size_t k = i; k < j; ++k) jac.masks.push_back(trace.masks[k]);
  if (jac.rows * jac.cols > explicit_limit) return jac;

  // Row c of `t` is J e_c, so each row passes through the layers as an
  // ordinary activation vector; J is its transpose.
  DenseMatrix t = DenseMatrix::identity(jac.cols);
  for (std::size_t k = i; k < j; ++k) {
    const Shape in = net.shape(k);
    const Shape out = net.shape(k + 1);
    const auto& mask = trace.masks[k];
    DenseMatrix next(jac.cols, out.size());
    kernels::parallel_for(jac.cols, [&](std::size_t c) {
      std::vector<double> row(t.row(c).begin(), t.row(c).end());
      for (std::size_t p = 0; p < row.size(); ++p)
        if (!mask[p]) row[p] = 0.0;
      apply_layer(net.layer(k + 1), in, row, next.row(c));
    });
    t = std::move(next);
  }
  jac.explicit_matrix = t.transpose();
  return jac;
}

std::vector<double> apply_jacobian(const JacobianView& jac, std::span<const double> v) {
  if (v.size() != jac.cols) {
    throw ShapeError("apply_jacobian: vector has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(jac.cols));
  }
  std::vector<double> cur(v.begin(), v.end());
  for (std::size_t k = jac.from; k < jac.to; ++k) {
    const auto& mask = jac.masks[k - jac.from];
    for (std::size_t p = 0; p < cur.size(); ++p)
      if (!mask[p]) cur[p] = 0.0;
    std::vector<double> next(jac.net->shape(k + 1).size());
    apply_layer(jac.net->layer(k + 1), jac.net->shape(k), cur, next);
    cur.swap(next);
  }
  return cur;
}

double jacobian_frobenius(const JacobianView& jac, std::size_t probes, RngStream stream) {
  if (jac.has_explicit()) return frobenius_norm(jac.explicit_matrix);
  std::vector<double> sq(probes);
  kernels::parallel_for(probes, [&](std::size_t p) {
    RngStream s = stream.derive(p);
    std::vector<double> g = sample_gaussian_vector(s, jac.cols);
    const std::vector<double> jg = apply_jacobian(jac, g);
    sq[p] = dot(jg, jg);
  });
  double sum = 0.0;
  for (double v : sq) sum += v;
  return std::sqrt(sum / static_cast<double>(probes));
}

}  // namespace nscomp
