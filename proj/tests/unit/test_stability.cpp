#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/netlab/jacobian.hpp"
#include "nscomp/netlab/synthetic.hpp"
#include "nscomp/netlab/train.hpp"
#include "nscomp/stability/stability.hpp"

using namespace nscomp;

namespace {

std::vector<std::vector<double>> random_inputs(std::size_t n, std::size_t dim, std::uint64_t seed) {
  RngStream s(seed, 0);
  std::vector<std::vector<double>> xs;
  for (std::size_t k = 0; k < n; ++k) xs.push_back(sample_gaussian_vector(s, dim));
  return xs;
}

Network random_mlp(std::uint64_t seed) {
  return init_network(Shape::flat(8), {{LayerSpec::Kind::Dense, 10}, {LayerSpec::Kind::Dense, 9}, {LayerSpec::Kind::Dense, 4}},
                      RngStream(seed, 1));
}

Network random_conv(std::uint64_t seed) {
  return init_network(Shape{2, 8, 8},
                      {{LayerSpec::Kind::Conv, 4, 3, 1}, {LayerSpec::Kind::Conv, 4, 3, 1}, {LayerSpec::Kind::Dense, 3}},
                      RngStream(seed, 2));
}

DenseMatrix permutation_matrix(std::size_t n, std::size_t shift) {
  DenseMatrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) p(i, (i + shift) % n) = 1.0;
  return p;
}

}  // namespace

TEST(NoiseSensitivity, IdentityGivesDimension) {
  const std::vector<double> x{0.3, -1.2, 2.0, 0.5, 1.0};
  NoiseSensitivity r = noise_sensitivity(DenseMatrix::identity(5), x, 20000, RngStream(1, 0));
  EXPECT_NEAR(r.psi, 5.0, 4 * r.std_error);
}

TEST(NoiseSensitivity, DiagonalExactValue) {
  const std::vector<double> d{3.0, 1.0}, e1{1.0, 0.0};
  NoiseSensitivity r = noise_sensitivity(DenseMatrix::diagonal(d), e1, 20000, RngStream(2, 0));
  EXPECT_NEAR(r.psi, 10.0 / 9.0, 3 * r.std_error);
}

TEST(NoiseSensitivity, AlignedRankOne) {
  RngStream s(3, 0);
  std::vector<double> u = sample_gaussian_vector(s, 4), v = sample_gaussian_vector(s, 6);
  DenseMatrix m(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) m(i, j) = u[i] * v[j];
  NoiseSensitivity r = noise_sensitivity(m, v, 20000, RngStream(3, 1));
  EXPECT_NEAR(r.psi, 1.0, 4 * r.std_error);
  EXPECT_THROW(noise_sensitivity(m, std::vector<double>(6, 0.0), 10, RngStream(3, 2)), DegenerateError);
}

TEST(NoiseSensitivity, StableRankIdentity) {
  RngStream s(4, 0);
  DenseMatrix a = sample_gaussian(s, 6, 5);
  for (int t = 0; t < 3; ++t) {
    std::vector<double> x = sample_gaussian_vector(s, 5);
    NoiseSensitivity r = noise_sensitivity(a, x, 20000, RngStream(4, t + 1));
    const double ax = norm2(matvec(a, x)), xn = norm2(x), fro = frobenius_norm(a);
    EXPECT_NEAR(r.psi * ax * ax / (xn * xn), fro * fro, 4 * r.std_error * ax * ax / (xn * xn));
    EXPECT_GE(r.psi + 4 * r.std_error, stable_rank(a));
  }
}

TEST(LayerCushion, IdentityLayer) {
  Network net(Shape::flat(4), {DenseLayer{DenseMatrix::identity(4)}, DenseLayer{DenseMatrix::identity(4)}});
  std::vector<std::vector<double>> xs{{1, 2, 0.5, 3}, {0.1, 0.2, 0.3, 0.4}};
  for (double mu : layer_cushion(net, xs)) EXPECT_NEAR(mu, 0.5, 1e-15);
}

TEST(LayerCushion, AlignedRankOne) {
  const std::vector<double> u{1.0, -2.0, 0.5}, v{0.5, 1.0, 2.0, 0.25};
  DenseMatrix a(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = u[i] * v[j];
  Network net(Shape::flat(4), {DenseLayer{a}});
  std::vector<std::vector<double>> xs{{1.0, 2.0, 4.0, 0.5}};
  EXPECT_NEAR(layer_cushion(net, xs)[0], 1.0, 1e-14);
}

TEST(LayerCushion, ZeroActivationExcluded) {
  // The second layer sees phi(x^1) = 0 for the second sample.
  Network net(Shape::flat(2), {DenseLayer{DenseMatrix::identity(2)}, DenseLayer{DenseMatrix::identity(2)}});
  std::vector<std::vector<double>> xs{{1.0, 1.0}, {-1.0, -1.0}};
  auto per = layer_cushion_samples(net, xs);
  EXPECT_TRUE(std::isnan(per[1][1]));
  EXPECT_NEAR(layer_cushion(net, xs)[1], 1 / std::sqrt(2.0), 1e-15);
  StabilityOptions o;
  o.measure_smoothness = false;
  StabilityReport rep = measure_stability(net, xs, o);
  EXPECT_EQ(rep.excluded, 1u);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(InterlayerCushion, DiagonalAndIsometry) {
  Network net(Shape::flat(3), {DenseLayer{DenseMatrix::identity(3)}, DenseLayer{permutation_matrix(3, 1)}});
  std::vector<std::vector<double>> xs{{1, 2, 3}, {0.5, 0.5, 4}};
  EXPECT_NEAR(interlayer_cushion(net, xs, 1, 1, false), 1 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(interlayer_cushion(net, xs, 1, 2, false), 1 / std::sqrt(3.0), 1e-14);
  EXPECT_THROW(interlayer_cushion(net, xs, 2, 1, false), UsageError);
}

TEST(InterlayerCushion, MatchesExplicitJacobian) {
  Network net = random_mlp(5);
  auto xs = random_inputs(20, 8, 5);
  for (std::size_t i = 1; i <= 2; ++i)
    for (std::size_t j = i + 1; j <= 3; ++j) {
      std::vector<double> per = interlayer_cushion_samples(net, xs, i, j, false);
      for (std::size_t s = 0; s < xs.size(); ++s) {
        ActivationTrace t = forward_trace(net, xs[s]);
        JacobianView jac = jacobian(net, t, i, j);
        const double expect = norm2(matvec(jac.explicit_matrix, t.x[i])) /
                              (frobenius_norm(jac.explicit_matrix) * norm2(t.x[i]));
        EXPECT_NEAR(per[s], expect, 1e-8);
      }
    }
}

TEST(InterlayerCushion, ConvScaling) {
  Network net = random_conv(6);
  auto xs = random_inputs(4, net.input_shape().size(), 6);
  std::vector<double> dense = interlayer_cushion_samples(net, xs, 1, 3, false);
  std::vector<double> conv = interlayer_cushion_samples(net, xs, 1, 3, true);
  const double pixels = static_cast<double>(net.shape(1).pixels());
  for (std::size_t s = 0; s < xs.size(); ++s) EXPECT_NEAR(conv[s], dense[s] * std::sqrt(pixels), 1e-12 * conv[s]);
}

TEST(ActivationContraction, Cases) {
  DenseMatrix pos(3, 3, 0.5);
  Network net(Shape::flat(3), {DenseLayer{pos}, DenseLayer{pos}, DenseLayer{pos}});
  std::vector<std::vector<double>> xs{{1, 2, 3}, {0.1, 0.1, 0.1}};
  EXPECT_EQ(activation_contraction(net, xs), 1.0);
  Network flip(Shape::flat(2), {DenseLayer{DenseMatrix::identity(2)}, DenseLayer{DenseMatrix::identity(2)}});
  std::vector<std::vector<double>> one{{1.0, -1.0}};
  EXPECT_NEAR(activation_contraction(flip, one), std::sqrt(2.0), 1e-15);
}

TEST(InterlayerSmoothness, LinearRegionIsInfinite) {
  DenseMatrix pos(4, 4, 0.25);
  Network net(Shape::flat(4), {DenseLayer{pos}, DenseLayer{pos}, DenseLayer{pos}});
  std::vector<std::vector<double>> xs{{1, 2, 3, 4}, {2, 2, 2, 2}};
  SmoothnessOptions o;
  o.source = NoiseSource::Gaussian;
  o.gaussian_rel_norm = 1e-6;
  o.trials = 20;
  SmoothnessResult r = interlayer_smoothness(net, xs, o, RngStream(7, 0));
  EXPECT_TRUE(std::isinf(r.rho));
}

TEST(InterlayerSmoothness, AdversarialSignFlip) {
  Network net(Shape::flat(2), {DenseLayer{DenseMatrix::identity(2)}, DenseLayer{DenseMatrix::identity(2)}});
  std::vector<std::vector<double>> xs{{1.0, 0.5}};
  SmoothnessOptions o;
  o.source = NoiseSource::Custom;
  o.trials = 10;
  o.custom = [](std::size_t, std::size_t, std::size_t, std::span<const double>) { return std::vector<double>{0.0, -1.0}; };
  // M(x+eta) = (1, 0), J(x+eta) = (1, -0.5): gap 0.5, ||eta|| = 1, ||x^2|| = ||x^1||.
  SmoothnessResult r = interlayer_smoothness(net, xs, o, RngStream(8, 0));
  EXPECT_NEAR(r.rho, 2.0, 1e-15);
  EXPECT_EQ(r.worst_i, 1u);
  EXPECT_EQ(r.worst_j, 2u);
  o.trials = 5;
  EXPECT_THROW(interlayer_smoothness(net, xs, o, RngStream(8, 0)), UsageError);
}

TEST(InterlayerSmoothness, CompressionNoiseIsDeterministic) {
  Network net = random_mlp(9);
  auto xs = random_inputs(10, 8, 9);
  SmoothnessOptions o;
  o.trials = 20;
  SmoothnessResult a = interlayer_smoothness(net, xs, o, RngStream(9, 1));
  SmoothnessResult b = interlayer_smoothness(net, xs, o, RngStream(9, 1));
  EXPECT_EQ(a.rho, b.rho);
  EXPECT_GT(a.rho, 0.0);
}

TEST(JacobianBeta, UniformAndSinglePixel) {
  Network uniform(Shape{1, 2, 2}, {ConvLayer{ConvFilter(1, 1, 1, 1.0), 1}});
  std::vector<std::vector<double>> xs{{1, 2, 3, 4}};
  EXPECT_NEAR(jacobian_beta(uniform, xs, 0, 1), 1.0, 1e-15);
  Network single(Shape{1, 2, 2}, {DenseLayer{DenseMatrix(1, 4, std::vector<double>{1, 0, 0, 0})}});
  EXPECT_NEAR(jacobian_beta(single, xs, 0, 1), 2.0, 1e-15);
}

TEST(JacobianBeta, SmallConvNetNearOne) {
  Network net = random_conv(10);
  auto xs = random_inputs(8, net.input_shape().size(), 10);
  const double beta = jacobian_beta(net, xs, 1, 3);
  EXPECT_GE(beta, 1.0);
  EXPECT_LE(beta, 3.0);
}

TEST(Attenuation, IsometricNetIsFlat) {
  Network net(Shape::flat(6), {DenseLayer{permutation_matrix(6, 1)}, DenseLayer{permutation_matrix(6, 2)},
                               DenseLayer{permutation_matrix(6, 3)}});
  std::vector<std::vector<double>> xs{std::vector<double>(6, 1.0)};
  auto curves = attenuation_profile(net, xs, 0.1, RngStream(11, 0));
  ASSERT_EQ(curves.size(), 2u);
  for (const auto& c : curves)
    for (double v : c) EXPECT_NEAR(v, 0.1, 1e-12);
}

TEST(StabilityReport, ScaleInvariancePerSample) {
  Network net = random_mlp(12);
  auto xs = random_inputs(15, 8, 12);
  StabilityOptions o;
  o.measure_smoothness = false;
  StabilityReport a = measure_stability(net, xs, o);
  xs[3] = std::vector<double>(xs[3]);
  for (double& v : xs[3]) v *= 7.5;
  StabilityReport b = measure_stability(net, xs, o);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(a.mu[i], b.mu[i], 1e-12 * a.mu[i]);
    EXPECT_NEAR(a.mu_to[i], b.mu_to[i], 1e-12 * a.mu_to[i]);
  }
  EXPECT_NEAR(a.c, b.c, 1e-12 * a.c);
}

TEST(StabilityReport, RebalanceInvariance) {
  Network net = random_mlp(13);
  scale_layer(net.mutable_layer(1), 10.0);
  scale_layer(net.mutable_layer(3), 0.02);
  auto xs = random_inputs(15, 8, 13);
  StabilityOptions o;
  o.smoothness.trials = 20;
  StabilityReport a = measure_stability(net, xs, o);
  StabilityReport b = measure_stability(rebalance(net), xs, o);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(a.mu[i], b.mu[i], 1e-6 * a.mu[i]);
    EXPECT_NEAR(a.mu_to[i], b.mu_to[i], 1e-6 * a.mu_to[i]);
  }
  EXPECT_NEAR(a.c, b.c, 1e-6 * a.c);
  EXPECT_NEAR(a.rho.rho, b.rho.rho, 1e-6 * a.rho.rho);
}

TEST(StabilityReport, InvariantsAndDeterminism) {
  Network net = random_conv(14);
  auto xs = random_inputs(6, net.input_shape().size(), 14);
  StabilityOptions o;
  o.smoothness.trials = 10;
  StabilityReport a = measure_stability(net, xs, o), b = measure_stability(net, xs, o);
  EXPECT_TRUE(a.conv_cushion);
  EXPECT_GE(a.c, 1.0);
  for (std::size_t i = 1; i <= 3; ++i) {
    const double h = static_cast<double>(net.shape(i).channels);
    EXPECT_LE(a.mu_to[i - 1], 1 / std::sqrt(h) + 1e-15);
    double m = 1 / std::sqrt(h);
    for (std::size_t j = i + 1; j <= 3; ++j) m = std::min(m, a.mu_ij[i - 1][j - 1]);
    EXPECT_EQ(a.mu_to[i - 1], m);
  }
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.mu_to, b.mu_to);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.rho.rho, b.rho.rho);
  EXPECT_EQ(a.beta[2], 1.0);
}

TEST(StabilityReport, ZetaQuantileMode) {
  const std::vector<double> v{0.5, 0.1, 0.9, std::nan(""), 0.7, 0.3, 0.2, 0.8, 0.6, 0.4};
  EXPECT_EQ(robust_extremum(v, 0.0, true), 0.1);
  EXPECT_EQ(robust_extremum(v, 0.0, false), 0.9);
  // The NaN already uses one of the two allowed outliers.
  EXPECT_EQ(robust_extremum(v, 0.2, true), 0.2);
  EXPECT_EQ(robust_extremum(v, 0.2, false), 0.8);
  EXPECT_EQ(lower_quantile({3.0, 1.0, INFINITY, 2.0}, 0.5), 3.0);
}
