#include "nscomp/netlab/noise.hpp"

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

std::vector<double> gaussian_with_norm(RngStream& stream, std::size_t n, double norm) {
  std::vector<double> g = sample_gaussian_vector(stream, n);
  const double gn = norm2(g);
  if (gn == 0.0) return g;
  for (double& v : g) v *= norm / gn;
  return g;
}

std::vector<double> inject_noise(const Network& net, const ActivationTrace& trace, std::size_t at_layer,
                                 double rel_norm, RngStream stream) {
  if (at_layer >= net.depth()) throw UsageError("inject_noise: injection layer must be below the output layer");
  if (!(rel_norm >= 0.0)) throw UsageError("inject_noise: rel_norm must be non-negative");
  const std::vector<double>& xi = trace.x.at(at_layer);
  const double xn = norm2(xi);
  if (xn == 0.0) throw DegenerateError("inject_noise: zero activation at layer " + std::to_string(at_layer));

  std::vector<double> noisy = gaussian_with_norm(stream, xi.size(), rel_norm * xn);
  for (std::size_t p = 0; p < xi.size(); ++p) noisy[p] += xi[p];

  std::vector<double> curve;
  curve.reserve(net.depth() - at_layer + 1);
  for (std::size_t j = at_layer; j <= net.depth(); ++j) {
    if (j > at_layer) noisy = net.propagate(j - 1, j, noisy);
    const std::vector<double>& clean = trace.x[j];
    double diff = 0.0;
    for (std::size_t p = 0; p < clean.size(); ++p) diff += (noisy[p] - clean[p]) * (noisy[p] - clean[p]);
    const double cn = norm2(clean);
    if (cn == 0.0) throw DegenerateError("inject_noise: zero activation at layer " + std::to_string(j));
    curve.push_back(std::sqrt(diff) / cn);
  }
  return curve;
}

}  // namespace nscomp
