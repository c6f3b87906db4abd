#include <gtest/gtest.h>

#include <cmath>

#include "nscomp/error.hpp"
#include "nscomp/netlab/jacobian.hpp"
#include "nscomp/netlab/network.hpp"
#include "nscomp/netlab/noise.hpp"
#include "nscomp/netlab/synthetic.hpp"
#include "nscomp/netlab/train.hpp"
#include "nscomp/numkit/linalg.hpp"

using namespace nscomp;

namespace {

Network dense_identity_net(std::size_t n, std::size_t depth) {
  std::vector<Layer> layers(depth, DenseLayer{DenseMatrix::identity(n)});
  return Network(Shape::flat(n), layers);
}

Network random_mlp(std::uint64_t seed, std::vector<std::size_t> widths) {
  std::vector<LayerSpec> arch;
  for (std::size_t k = 1; k < widths.size(); ++k) arch.push_back({LayerSpec::Kind::Dense, widths[k]});
  return init_network(Shape::flat(widths[0]), arch, RngStream(seed, 1));
}

Network random_convnet(std::uint64_t seed) {
  std::vector<LayerSpec> arch{{LayerSpec::Kind::Conv, 4, 3, 1}, {LayerSpec::Kind::Conv, 5, 2, 2}, {LayerSpec::Kind::Dense, 3}};
  return init_network(Shape{2, 8, 8}, arch, RngStream(seed, 2));
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Straight-line forward pass written independently of Network::propagate.
std::vector<double> naive_mlp_forward(const Network& net, std::vector<double> x) {
  for (std::size_t k = 1; k <= net.depth(); ++k) {
    const DenseMatrix& w = std::get<DenseLayer>(net.layer(k)).weights;
    if (k > 1)
      for (double& v : x) v = std::max(v, 0.0);
    std::vector<double> y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) y[r] += w(r, c) * x[c];
    x = y;
  }
  return x;
}

// Patch-loop convolution oracle (1-based formulas translated literally).
FeatureMap naive_conv(const ConvFilter& f, std::size_t s, const FeatureMap& x) {
  const std::size_t k = f.width();
  const std::size_t o1 = (x.height() - k) / s + 1, o2 = (x.width() - k) / s + 1;
  FeatureMap y(f.out_channels(), o1, o2);
  for (std::size_t o = 0; o < f.out_channels(); ++o)
    for (std::size_t i = 1; i <= o1; ++i)
      for (std::size_t j = 1; j <= o2; ++j) {
        double acc = 0;
        for (std::size_t c = 0; c < f.in_channels(); ++c)
          for (std::size_t u = 0; u < k; ++u)
            for (std::size_t v = 0; v < k; ++v) acc += f(o, c, u, v) * x(c, s * (i - 1) + u, s * (j - 1) + v);
        y(o, i - 1, j - 1) = acc;
      }
  return y;
}

std::vector<double> random_input(RngStream& s, std::size_t n) { return sample_gaussian_vector(s, n); }

}  // namespace

TEST(ForwardTrace, RawInputIsNotRectified) {
  const std::vector<double> x{1.0, -1.0};
  ActivationTrace t1 = forward_trace(dense_identity_net(2, 1), x);
  EXPECT_EQ(t1.x[1], (std::vector<double>{1.0, -1.0}));
  ActivationTrace t2 = forward_trace(dense_identity_net(2, 2), x);
  EXPECT_EQ(t2.x[2], (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(t2.masks[1], (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(t2.masks[0], (std::vector<std::uint8_t>{1, 1}));
}

TEST(ForwardTrace, MatchesStraightLineOracle) {
  RngStream s(3, 0);
  Network net = random_mlp(1, {6, 9, 7, 4});
  for (int t = 0; t < 10; ++t) {
    std::vector<double> x = random_input(s, 6);
    EXPECT_LE(rel_diff(forward_trace(net, x).x[3], naive_mlp_forward(net, x)), 1e-12);
  }
}

TEST(ForwardTrace, ShapeMismatchThrows) {
  Network net = random_mlp(1, {6, 4});
  EXPECT_THROW(forward_trace(net, std::vector<double>(5)), ShapeError);
}

TEST(Network, RejectsNonComposingLayers) {
  std::vector<Layer> bad{DenseLayer{DenseMatrix(3, 4)}, DenseLayer{DenseMatrix(2, 5)}};
  EXPECT_THROW(Network(Shape::flat(4), bad), ShapeError);
  std::vector<Layer> big{ConvLayer{ConvFilter(1, 1, 5), 1}};
  EXPECT_THROW(Network(Shape{1, 4, 4}, big), ShapeError);
}

TEST(ConvForward, IdentityAndHandArithmetic) {
  RngStream s(4, 0);
  FeatureMap x(2, 4, 5, sample_gaussian_vector(s, 40));
  ConvFilter id(2, 2, 1);
  id(0, 0, 0, 0) = 1.0;
  id(1, 1, 0, 0) = 1.0;
  EXPECT_EQ(conv_forward(id, 1, x).values(), x.values());

  FeatureMap ones(1, 3, 3, std::vector<double>(9, 1.0));
  FeatureMap y = conv_forward(ConvFilter(1, 1, 2, std::vector<double>(4, 1.0)), 1, ones);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  for (double v : y.data()) EXPECT_EQ(v, 4.0);
}

TEST(ConvForward, MatchesPatchLoopOracleAndIsBilinear) {
  RngStream s(5, 0);
  for (std::size_t stride : {1, 2, 3}) {
    ConvFilter f = sample_gaussian(s, 3, 2, 3);
    FeatureMap x(2, 9, 10, sample_gaussian_vector(s, 180));
    FeatureMap got = conv_forward(f, stride, x);
    FeatureMap want = naive_conv(f, stride, x);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);

    FeatureMap x2(2, 9, 10, sample_gaussian_vector(s, 180));
    FeatureMap sum(2, 9, 10);
    for (std::size_t i = 0; i < 180; ++i) sum.data()[i] = 2.0 * x.data()[i] + x2.data()[i];
    FeatureMap lin = conv_forward(f, stride, sum), y2 = conv_forward(f, stride, x2);
    for (std::size_t i = 0; i < lin.size(); ++i) EXPECT_NEAR(lin.data()[i], 2.0 * got.data()[i] + y2.data()[i], 1e-12);
  }
  EXPECT_THROW(conv_forward(ConvFilter(1, 1, 4), 1, FeatureMap(1, 3, 3)), ShapeError);
}

TEST(Jacobian, DiagonalBlockIsIdentity) {
  Network net = random_mlp(2, {5, 6, 3});
  RngStream s(1, 1);
  ActivationTrace t = forward_trace(net, random_input(s, 5));
  JacobianView j = jacobian(net, t, 1, 1);
  EXPECT_EQ(j.explicit_matrix, DenseMatrix::identity(6));
  EXPECT_THROW(jacobian(net, t, 2, 1), ShapeError);
}

TEST(Jacobian, LinearNetIsWeightProduct) {
  RngStream s(6, 0);
  DenseMatrix a = sample_gaussian(s, 4, 3), b = sample_gaussian(s, 2, 4);
  for (double& v : a.data()) v = std::abs(v);
  for (double& v : b.data()) v = std::abs(v);
  Network net(Shape::flat(3), {DenseLayer{a}, DenseLayer{b}});
  std::vector<double> x{0.5, 1.0, 2.0};
  ActivationTrace t = forward_trace(net, x);
  DenseMatrix want = matmul(b, a);
  DenseMatrix got = jacobian(net, t, 0, 2).explicit_matrix;
  EXPECT_LE(frobenius_norm(got - want), 1e-14 * frobenius_norm(want));
}

TEST(Jacobian, ReproducesActivationsAndChainRule) {
  RngStream s(7, 0);
  for (int n = 0; n < 5; ++n) {
    Network net = n % 2 ? random_mlp(10 + n, {8, 12, 10, 9, 4}) : random_convnet(10 + n);
    ActivationTrace t = forward_trace(net, random_input(s, net.input_shape().size()));
    const std::size_t d = net.depth();
    for (std::size_t i = 0; i <= d; ++i)
      for (std::size_t j = i; j <= d; ++j) {
        JacobianView jac = jacobian(net, t, i, j);
        EXPECT_LE(rel_diff(matvec(jac.explicit_matrix, t.x[i]), t.x[j]), 1e-10);
        EXPECT_LE(rel_diff(apply_jacobian(jac, t.x[i]), t.x[j]), 1e-10);
        std::vector<double> v = random_input(s, jac.cols);
        EXPECT_LE(rel_diff(apply_jacobian(jac, v), matvec(jac.explicit_matrix, v)), 1e-10);
        for (std::size_t k = j; k <= d; ++k) {
          DenseMatrix lhs = jacobian(net, t, i, k).explicit_matrix;
          DenseMatrix rhs = matmul(jacobian(net, t, j, k).explicit_matrix, jac.explicit_matrix);
          EXPECT_LE(frobenius_norm(lhs - rhs), 1e-8 * std::max(frobenius_norm(lhs), 1e-300));
        }
      }
    JacobianView z = jacobian(net, t, 0, d);
    EXPECT_EQ(apply_jacobian(z, std::vector<double>(z.cols, 0.0)), std::vector<double>(z.rows, 0.0));
  }
}

TEST(Jacobian, MatchesCentralFiniteDifferences) {
  RngStream s(8, 0);
  for (int n = 0; n < 4; ++n) {
    Network net = n % 2 ? random_mlp(20 + n, {5, 7, 6, 3}) : random_convnet(20 + n);
    std::vector<double> x = random_input(s, net.input_shape().size());
    ActivationTrace t = forward_trace(net, x);
    DenseMatrix j = jacobian(net, t, 0, net.depth()).explicit_matrix;
    const double h = 1e-5;
    for (std::size_t c = 0; c < x.size(); ++c) {
      std::vector<double> xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      ActivationTrace tp = forward_trace(net, xp), tm = forward_trace(net, xm);
      if (tp.masks != t.masks || tm.masks != t.masks) continue;  // crosses a ReLU boundary
      std::vector<double> fp = tp.x.back(), fm = tm.x.back();
      for (std::size_t r = 0; r < fp.size(); ++r) EXPECT_NEAR((fp[r] - fm[r]) / (2 * h), j(r, c), 1e-4);
    }
  }
}

TEST(Jacobian, ImplicitViewAndHutchinson) {
  RngStream s(9, 0);
  Network net = random_mlp(3, {30, 40, 20});
  ActivationTrace t = forward_trace(net, random_input(s, 30));
  JacobianView full = jacobian(net, t, 0, 2);
  JacobianView lazy = jacobian(net, t, 0, 2, 10);
  EXPECT_FALSE(lazy.has_explicit());
  const double exact = jacobian_frobenius(full);
  EXPECT_NEAR(jacobian_frobenius(lazy, 2000), exact, 0.05 * exact);
}

TEST(InjectNoise, TrivialCases) {
  RngStream s(10, 0);
  Network net = random_mlp(4, {6, 8, 5});
  ActivationTrace t = forward_trace(net, random_input(s, 6));
  for (double v : inject_noise(net, t, 0, 0.0, RngStream(1, 0))) EXPECT_EQ(v, 0.0);

  DenseMatrix c = DenseMatrix::identity(4);
  c *= 3.0;
  Network lin(Shape::flat(4), {DenseLayer{c}});
  ActivationTrace tl = forward_trace(lin, std::vector<double>{1, -2, 3, 0.5});
  std::vector<double> curve = inject_noise(lin, tl, 0, 0.1, RngStream(2, 0));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_NEAR(curve[0], 0.1, 1e-14);
  EXPECT_NEAR(curve[1], 0.1, 1e-14);
  EXPECT_THROW(inject_noise(lin, tl, 1, 0.1, RngStream(2, 0)), UsageError);
}

TEST(Rebalance, EqualizesNormsAndPreservesFunction) {
  RngStream s(11, 0);
  DenseMatrix a = sample_gaussian(s, 5, 4), b = sample_gaussian(s, 3, 5);
  a *= 4.0 / frobenius_norm(a);
  b *= 1.0 / frobenius_norm(b);
  Network net(Shape::flat(4), {DenseLayer{a}, DenseLayer{b}});
  Network r = rebalance(net);
  EXPECT_NEAR(layer_frobenius_norm(r.layer(1)), 2.0, 2e-8);
  EXPECT_NEAR(layer_frobenius_norm(r.layer(2)), 2.0, 2e-8);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x = random_input(s, 4);
    EXPECT_LE(rel_diff(r.forward(x), net.forward(x)), 1e-9);
  }
  Network again = rebalance(r);
  for (std::size_t k = 1; k <= 2; ++k) {
    const auto& w0 = std::get<DenseLayer>(r.layer(k)).weights;
    const auto& w1 = std::get<DenseLayer>(again.layer(k)).weights;
    EXPECT_LE(frobenius_norm(w1 - w0), 1e-12 * frobenius_norm(w0));
  }
  Network scaled = net;
  scale_layer(scaled.mutable_layer(1), 7.0);
  scale_layer(scaled.mutable_layer(2), 1.0 / 7.0);
  Network rs = rebalance(scaled);
  for (std::size_t k = 1; k <= 2; ++k) {
    const auto& w0 = std::get<DenseLayer>(r.layer(k)).weights;
    const auto& w1 = std::get<DenseLayer>(rs.layer(k)).weights;
    EXPECT_LE(frobenius_norm(w1 - w0), 1e-12 * frobenius_norm(w0));
  }
  Network zero(Shape::flat(2), {DenseLayer{DenseMatrix(2, 2)}});
  EXPECT_THROW(rebalance(zero), DegenerateError);
}

TEST(Train, SeparableBlobsReachFullAccuracy) {
  BlobConfig bc;
  bc.count = 400;
  bc.classes = 2;
  bc.features = 10;
  bc.spread = 0.3;
  Dataset data = make_blobs(bc, RngStream(5, 0));
  Network init = init_network(data.input_shape, {{LayerSpec::Kind::Dense, 16}, {LayerSpec::Kind::Dense, 2}},
                              RngStream(5, 1));
  TrainConfig tc;
  tc.epochs = 50;
  tc.seed = 5;
  TrainResult r = train_sgd(init, data, tc);
  EXPECT_GE(r.log.train_accuracy.back(), 0.99);

  TrainResult again = train_sgd(init, data, tc);
  EXPECT_EQ(std::get<DenseLayer>(again.net.layer(1)).weights, std::get<DenseLayer>(r.net.layer(1)).weights);

  tc.epochs = 0;
  TrainResult none = train_sgd(init, data, tc);
  EXPECT_EQ(std::get<DenseLayer>(none.net.layer(1)).weights, std::get<DenseLayer>(init.layer(1)).weights);
}

TEST(Train, ConvNetLearns) {
  BlobConfig bc;
  bc.count = 300;
  bc.classes = 3;
  bc.channels = 2;
  bc.size = 8;
  bc.spread = 0.5;
  Dataset data = make_blobs(bc, RngStream(6, 0));
  Network init = init_network(data.input_shape,
                              {{LayerSpec::Kind::Conv, 6, 3, 1}, {LayerSpec::Kind::Conv, 6, 3, 1}, {LayerSpec::Kind::Dense, 3}},
                              RngStream(6, 1));
  TrainConfig tc;
  tc.epochs = 20;
  tc.lr = 0.02;
  TrainResult r = train_sgd(init, data, tc);
  EXPECT_GE(r.log.train_accuracy.back(), 0.95);
}

TEST(Train, DivergenceReportsEpoch) {
  BlobConfig bc;
  bc.count = 50;
  bc.classes = 2;
  bc.features = 4;
  Dataset data = make_blobs(bc, RngStream(7, 0));
  Network init = init_network(data.input_shape, {{LayerSpec::Kind::Dense, 8}, {LayerSpec::Kind::Dense, 2}},
                              RngStream(7, 1));
  TrainConfig tc;
  tc.epochs = 5;
  tc.lr = 1e200;
  try {
    train_sgd(init, data, tc);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_LT(e.epoch(), 5u);
  }
}

TEST(Synthetic, NormalizedWithBiasAndShuffle) {
  BlobConfig bc;
  bc.count = 30;
  bc.classes = 3;
  bc.features = 5;
  Dataset d = make_blobs(bc, RngStream(8, 0));
  d.validate();
  EXPECT_EQ(d.input_shape, Shape::flat(6));
  for (const auto& x : d.inputs) {
    EXPECT_NEAR(norm2(x), std::sqrt(2.0), 1e-12);
    EXPECT_EQ(x.back(), 1.0);
  }
  Dataset sh = shuffle_labels(d, RngStream(8, 1));
  EXPECT_NE(sh.labels, d.labels);
  std::vector<int> c0(3), c1(3);
  for (auto l : d.labels) ++c0[l];
  for (auto l : sh.labels) ++c1[l];
  EXPECT_EQ(c0, c1);
}
