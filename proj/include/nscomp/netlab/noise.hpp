#pragma once

#include <cstddef>
#include <vector>

#include "nscomp/netlab/network.hpp"
#include "nscomp/numkit/rng.hpp"

namespace nscomp {

// Adds Gaussian noise with norm rel_norm * ||x^i|| to x^i, propagates it and
// returns ||x_hat^j - x^j|| / ||x^j|| for j = i..d (entry 0 is rel_norm).
std::vector<double> inject_noise(const Network& net, const ActivationTrace& trace, std::size_t at_layer,
                                 double rel_norm, RngStream stream);

// Gaussian vector of dimension n scaled to the given norm.
std::vector<double> gaussian_with_norm(RngStream& stream, std::size_t n, double norm);

}  // namespace nscomp
