#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nscomp/compressors/helper.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

struct VectorCompressResult {
  std::vector<double> c_hat;
  std::vector<double> probabilities;  // p_i = min(1, 2 c_i^2 / (eta gamma^2))
  std::size_t nonzeros = 0;
};

// Importance sampling of coordinates: c_hat_i = z_i c_i / p_i with
// z_i ~ Bernoulli(p_i). Throws UsageError when ||c|| > 1.
VectorCompressResult vector_compress(std::span<const double> c, double gamma, double eta, const RngStream& stream);

// Rounds to multiples of gamma / (2 sqrt(h)); coordinates below
// gamma / (4 sqrt(h)) in magnitude become exactly zero.
std::vector<double> vector_discretize(std::span<const double> c_tilde, double gamma, std::size_t h);

struct VectorProjectResult {
  std::size_t k = 0;
  std::vector<double> z;      // coefficients <v_i, c>, rounded when requested
  std::vector<double> c_hat;  // (1/k) sum z_i v_i
};

// k = ceil(16 ln(1/eta) / gamma^2) Gaussian directions from the helper.
std::size_t vector_project_k(double gamma, double eta);

// Gaussian random projection sketch. With round_coefficients the z_i are
// rounded to multiples of gamma / (2 sqrt(h k)).
VectorProjectResult vector_project(std::span<const double> c, double gamma, double eta, const HelperString& helper,
                                   bool round_coefficients = false);

}  // namespace nscomp
