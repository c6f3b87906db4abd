#include "nscomp/conclab/conclab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "nscomp/compressors/conv.hpp"
#include "nscomp/compressors/matrix.hpp"
#include "nscomp/compressors/vector.hpp"
#include "nscomp/error.hpp"
#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

namespace nscomp {

void TailReport::decide() { pass = empirical <= bound + 3.0 * std_error; }

double binomial_stderr(double p, std::size_t n) {
  p = std::clamp(p, 0.0, 1.0);
  return n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

namespace {

std::uint64_t trial_seed(const RngStream& stream, std::size_t t) { return stream.derive(t).bits(0); }

std::vector<double> unit_vector(RngStream& s, std::size_t n) {
  std::vector<double> v = sample_gaussian_vector(s, n);
  const double nv = norm2(v);
  for (double& x : v) x /= nv;
  return v;
}

TailReport tail_report(std::string id, std::size_t trials, double threshold, std::size_t failures, double bound) {
  TailReport r;
  r.id = std::move(id);
  r.trials = trials;
  r.threshold = threshold;
  r.failures = failures;
  r.empirical = static_cast<double>(failures) / static_cast<double>(trials);
  r.bound = std::min(1.0, bound);
  r.std_error = binomial_stderr(r.bound, trials);
  r.decide();
  return r;
}

void check_trials(std::size_t trials) {
  if (trials == 0) throw UsageError("Monte Carlo run needs at least one trial");
}

}  // namespace

TailReport mc_matrix_project_tail(double eps, double eta, std::size_t trials, const RngStream& stream,
                                  const MatrixTailOptions& options) {
  check_trials(trials);
  RngStream setup = stream.derive(0xF1);
  const DenseMatrix a = sample_gaussian(setup, options.rows, options.cols);
  DenseMatrix u(options.u_rows, options.rows);
  if (options.u_rows == 1) {
    const std::vector<double> v = unit_vector(setup, options.rows);
    std::copy(v.begin(), v.end(), u.data().begin());
  } else {
    u = sample_gaussian(setup, options.u_rows, options.rows);
  }
  const std::vector<double> x = unit_vector(setup, options.cols);
  const double threshold = eps * frobenius_norm(a) * frobenius_norm(u) * norm2(x);
  const std::vector<double> ax = matvec(a, x);

  MatrixProjectOptions mo;
  mo.quantize = false;
  mo.k_override = options.k_override;
  const RngStream draws = stream.derive(0xF2);
  std::vector<std::uint8_t> fail(trials, 0);
  kernels::parallel_for(trials, [&](std::size_t t) {
    const CompressedLayer l = matrix_project(a, eps, eta, HelperString{trial_seed(draws, t), Scheme::MatrixProject}, mo);
    std::vector<double> d = matvec(std::get<DenseLayer>(l.weights).weights, x);
    for (std::size_t p = 0; p < d.size(); ++p) d[p] -= ax[p];
    fail[t] = norm2(matvec(u, d)) > threshold;
  });
  std::size_t failures = 0;
  for (auto f : fail) failures += f;
  TailReport r = tail_report("matrix_project_tail", trials, threshold, failures, eta * static_cast<double>(options.u_rows));
  const std::size_t k = options.k_override > 0 ? options.k_override : matrix_project_k(eps, eta);
  r.params = {{"eps", eps}, {"eta", eta}, {"k", static_cast<double>(k)}, {"rows", static_cast<double>(options.rows)},
              {"cols", static_cast<double>(options.cols)}, {"u_rows", static_cast<double>(options.u_rows)}};
  return r;
}

TailReport mc_conv_delta_tail(double eps, double eta, std::size_t trials, const RngStream& stream,
                              const ConvTailOptions& o) {
  check_trials(trials);
  if (o.input_size < o.width) throw UsageError("conv tail: filter wider than the input");
  const std::size_t np = (o.input_size - o.width) / o.stride + 1;
  const std::size_t pixels = np * np;
  RngStream setup = stream.derive(0xC1);
  const ConvFilter a = o.zero_filter ? ConvFilter(o.out_channels, o.in_channels, o.width)
                                     : sample_gaussian(setup, o.out_channels, o.in_channels, o.width);
  const std::vector<double> v = sample_gaussian_vector(setup, o.in_channels * o.input_size * o.input_size);
  const Shape in{o.in_channels, o.input_size, o.input_size};

  // U[(c * pixels + pix) * n_u + out]
  const std::size_t ylen = o.out_channels * pixels;
  std::vector<double> u(ylen * o.u_outputs, 0.0);
  if (o.u_shape == UShape::SinglePixel) {
    for (std::size_t c = 0; c < o.out_channels; ++c)
      for (std::size_t q = 0; q < o.u_outputs; ++q) u[(c * pixels) * o.u_outputs + q] = setup.next_normal();
  } else {
    for (double& x : u) x = setup.next_normal();
    if (o.u_shape == UShape::Uniform) {
      for (std::size_t pix = 0; pix < pixels; ++pix) {
        double s = 0.0;
        for (std::size_t c = 0; c < o.out_channels; ++c)
          for (std::size_t q = 0; q < o.u_outputs; ++q) s += std::pow(u[(c * pixels + pix) * o.u_outputs + q], 2);
        s = std::sqrt(s);
        for (std::size_t c = 0; c < o.out_channels; ++c)
          for (std::size_t q = 0; q < o.u_outputs; ++q) u[(c * pixels + pix) * o.u_outputs + q] /= s;
      }
    }
  }
  double ufro2 = 0.0, max_slice = 0.0;
  for (std::size_t pix = 0; pix < pixels; ++pix) {
    double s = 0.0;
    for (std::size_t c = 0; c < o.out_channels; ++c)
      for (std::size_t q = 0; q < o.u_outputs; ++q) s += std::pow(u[(c * pixels + pix) * o.u_outputs + q], 2);
    ufro2 += s;
    max_slice = std::max(max_slice, s);
  }
  const double beta = std::sqrt(static_cast<double>(pixels) * max_slice / ufro2);
  const double threshold = eps * beta / std::sqrt(static_cast<double>(pixels)) * frobenius_norm(a) *
                           std::sqrt(ufro2) * norm2(v);

  ConvProjectOptions co;
  co.quantize = false;
  co.clamp_to_full_space = true;
  co.q_constant = o.q_constant;
  const RngStream draws = stream.derive(0xC2);
  std::vector<std::uint8_t> fail(trials, 0);
  kernels::parallel_for(trials, [&](std::size_t t) {
    CompressedLayer l = conv_project_pwise(a, eps, eta, o.stride, np, np,
                                           HelperString{trial_seed(draws, t), Scheme::ConvPwiseProject}, co);
    for (ConvFilter& f : l.local_filters)
      for (std::size_t p = 0; p < f.size(); ++p) f.data()[p] -= a.data()[p];
    std::vector<double> y(ylen);
    kernels::serial::conv_forward_local(l.local_filters, o.stride, in, v, y);
    double z2 = 0.0;
    for (std::size_t q = 0; q < o.u_outputs; ++q) {
      double z = 0.0;
      for (std::size_t e = 0; e < ylen; ++e) z += u[e * o.u_outputs + q] * y[e];
      z2 += z * z;
    }
    fail[t] = std::sqrt(z2) > threshold;
  });
  std::size_t failures = 0;
  for (auto f : fail) failures += f;
  TailReport r = tail_report("conv_delta_tail", trials, threshold, failures, eta * static_cast<double>(o.u_outputs));
  r.params = {{"eps", eps}, {"eta", eta}, {"beta", beta}, {"out_pixels", static_cast<double>(pixels)},
              {"width", static_cast<double>(o.width)}, {"stride", static_cast<double>(o.stride)}};
  return r;
}

PwiseReport mc_pwise_moments(PwiseConstruction construction, std::size_t p, const std::vector<double>& sigma,
                             std::size_t trials, const RngStream& stream, const PwiseOptions& options) {
  check_trials(trials);
  if (p == 0) throw UsageError("pwise moments: p must be positive");
  if (sigma.size() < 2) throw UsageError("pwise moments: need at least two summands");
  const std::size_t dim = options.ambient;
  const std::size_t m = options.vector_dim;
  if (m > 0 && p % 2 != 0) throw UsageError("pwise moments: the vector form needs even p");
  if (construction == PwiseConstruction::Subspace && (p > dim || m + 1 > dim)) {
    throw SizeError("pwise moments: subspace dimension exceeds the ambient space");
  }
  const std::size_t n = sigma.size();
  double s2 = 0.0;
  for (double s : sigma) s2 += s * s;
  const double sig = std::sqrt(s2);

  // Scalar: X_i = sigma_i <e_{D-1}, M'_i><e_{D-2}, M'_i>. Vector: X_i =
  // sigma_i <e_{D-1}, M'_i> (M'_i)_{0..m-1} / sqrt(m). Both have mean zero.
  std::vector<double> norm_x(trials), x1(trials), x2(trials);
  const double c = std::sqrt(static_cast<double>(dim) / static_cast<double>(p));
  kernels::parallel_for(trials, [&](std::size_t t) {
    const RngStream ts = stream.derive(t);
    DenseMatrix q;
    if (construction == PwiseConstruction::Subspace) q = sample_pwise_subspace(dim, 1, p, ts.derive(0)).basis;
    const RngStream g = ts.derive(1);
    std::vector<double> total(std::max<std::size_t>(m, 1), 0.0);
    std::vector<double> w(p), mp(dim);
    for (std::size_t i = 0; i < n; ++i) {
      // Coordinates of M'_i that the summand needs.
      auto coord = [&](std::size_t j) {
        if (construction == PwiseConstruction::Independent) return g.normal(i * dim + j);
        double s = 0.0;
        for (std::size_t r = 0; r < p; ++r) s += q(r, j) * w[r];
        return c * s;
      };
      if (construction == PwiseConstruction::Subspace)
        for (std::size_t r = 0; r < p; ++r) w[r] = g.normal(i * p + r);
      const double a = coord(dim - 1);
      double xi_norm;
      if (m == 0) {
        const double xi = sigma[i] * a * coord(dim - 2);
        total[0] += xi;
        xi_norm = xi;
      } else {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double e = sigma[i] * a * coord(j) / std::sqrt(static_cast<double>(m));
          total[j] += e;
          s += e * e;
        }
        xi_norm = std::sqrt(s);
      }
      if (i == 0) x1[t] = xi_norm;
      if (i == 1) x2[t] = xi_norm;
    }
    norm_x[t] = m == 0 ? std::abs(total[0]) : norm2(total);
  });

  const std::string base = std::string(m > 0 ? "pwise_vector_" : "pwise_") +
                           (construction == PwiseConstruction::Subspace ? "subspace" : "independent") + "_p" +
                           std::to_string(p);
  const auto pd = static_cast<double>(p);
  const auto nt = static_cast<double>(trials);
  PwiseReport rep;
  {
    double mean = 0.0, sq = 0.0;
    for (double v : norm_x) {
      const double mv = std::pow(v, pd);
      mean += mv;
      sq += mv * mv;
    }
    mean /= nt;
    const double var = std::max(0.0, sq / nt - mean * mean);
    TailReport& r = rep.moment;
    r.id = base + "_moment";
    r.kind = "moment";
    r.trials = trials;
    r.empirical = mean;
    r.bound = std::pow(3.0 * sig, pd) * std::pow(2.0 * pd, pd);
    r.std_error = std::sqrt(var / nt);
    r.params = {{"p", pd}, {"sigma", sig}, {"n", static_cast<double>(n)}};
    r.decide();
  }
  for (double tt : {2.0, 4.0}) {
    const double thr = 6.0 * sig * pd * tt;
    std::size_t fails = 0;
    for (double v : norm_x) fails += v > thr;
    TailReport r = tail_report(base + "_tail_t" + std::to_string(static_cast<int>(tt)), trials, thr, fails,
                               1.0 / std::pow(tt, pd));
    r.params = {{"p", pd}, {"t", tt}, {"sigma", sig}};
    rep.tails.push_back(r);
  }
  {
    double m1 = 0, m2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      m1 += x1[t];
      m2 += x2[t];
    }
    m1 /= nt;
    m2 /= nt;
    for (std::size_t t = 0; t < trials; ++t) {
      s11 += (x1[t] - m1) * (x1[t] - m1);
      s22 += (x2[t] - m2) * (x2[t] - m2);
      s12 += (x1[t] - m1) * (x2[t] - m2);
    }
    TailReport& r = rep.correlation;
    r.id = base + "_pair_correlation";
    r.kind = "correlation";
    r.trials = trials;
    r.empirical = (s11 > 0 && s22 > 0) ? std::abs(s12) / std::sqrt(s11 * s22) : 0.0;
    r.bound = 4.0 / std::sqrt(nt);
    r.std_error = 0.0;
    r.params = {{"p", pd}};
    r.decide();
  }
  return rep;
}

VectorSchemesReport mc_vector_schemes(std::size_t h, double gamma, double eta, std::size_t trials,
                                      const RngStream& stream, bool adversarial_u) {
  check_trials(trials);
  RngStream setup = stream.derive(0xE1);
  const std::vector<double> c = unit_vector(setup, h);
  std::vector<double> u(h, 0.0);
  if (adversarial_u) {
    // The coordinate with the largest single-draw deviation |c_i / p_i - c_i|.
    std::size_t worst = 0;
    double worst_dev = -1.0;
    for (std::size_t i = 0; i < h; ++i) {
      const double p = std::min(1.0, 2.0 * c[i] * c[i] / (eta * gamma * gamma));
      const double dev = p > 0.0 ? std::abs(c[i] / p - c[i]) : 0.0;
      if (dev > worst_dev) {
        worst_dev = dev;
        worst = i;
      }
    }
    u[worst] = 1.0;
  } else {
    u = unit_vector(setup, h);
  }
  const double cu = dot(c, u);

  VectorSchemesReport rep;
  {
    std::vector<std::uint8_t> fail(trials, 0);
    std::vector<double> nnz(trials);
    const RngStream draws = stream.derive(0xE2);
    kernels::parallel_for(trials, [&](std::size_t t) {
      const VectorCompressResult r = vector_compress(c, gamma, eta, draws.derive(t));
      fail[t] = std::abs(dot(r.c_hat, u) - cu) > gamma;
      nnz[t] = static_cast<double>(r.nonzeros);
    });
    std::size_t failures = 0;
    for (auto f : fail) failures += f;
    rep.compress = tail_report(adversarial_u ? "vector_compress_adversarial" : "vector_compress_tail", trials, gamma,
                               failures, eta);
    rep.compress.params = {{"h", static_cast<double>(h)}, {"gamma", gamma}, {"eta", eta}};
    if (adversarial_u) rep.compress.gate = false;

    double mean = 0.0, sq = 0.0;
    for (double v : nnz) {
      mean += v;
      sq += v * v;
    }
    mean /= static_cast<double>(trials);
    TailReport& r = rep.nnz;
    r.id = "vector_compress_nnz";
    r.kind = "mean";
    r.trials = trials;
    r.empirical = mean;
    r.bound = 2.0 / (eta * gamma * gamma);
    r.std_error = std::sqrt(std::max(0.0, sq / static_cast<double>(trials) - mean * mean) / static_cast<double>(trials));
    r.params = {{"h", static_cast<double>(h)}};
    r.decide();
    if (adversarial_u) r.gate = false;
  }
  {
    const std::size_t k = vector_project_k(gamma, eta);
    const double cn = norm2(c), un = norm2(u);
    // (<c, v>, <u, v>) for v ~ N(0, I) is bivariate normal with this covariance.
    const double rho = cn > 0.0 && un > 0.0 ? cu / (cn * un) : 0.0;
    const double ortho = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    std::vector<std::uint8_t> fail(trials, 0);
    const RngStream draws = stream.derive(0xE3);
    kernels::parallel_for(trials, [&](std::size_t t) {
      const RngStream g = draws.derive(t);
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double g1 = g.normal(2 * j), g2 = g.normal(2 * j + 1);
        s += (cn * g1) * (un * (rho * g1 + ortho * g2));
      }
      fail[t] = std::abs(s / static_cast<double>(k) - cu) > gamma;
    });
    std::size_t failures = 0;
    for (auto f : fail) failures += f;
    rep.project = tail_report(adversarial_u ? "vector_project_adversarial" : "vector_project_tail", trials, gamma,
                              failures, eta);
    rep.project.params = {{"h", static_cast<double>(h)}, {"gamma", gamma}, {"eta", eta}, {"k", static_cast<double>(k)}};
    if (adversarial_u) rep.project.gate = false;
  }
  return rep;
}

double claim_sum_enumerate(const std::vector<double>& sigma, std::size_t p) {
  const std::size_t n = sigma.size();
  double total = 0.0;
  std::vector<std::size_t> a(n, 0);
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t left, double prod) {
    if (i == n) {
      if (left == 0) total += prod;
      return;
    }
    rec(i + 1, left, prod);
    for (std::size_t v = 2; v <= left; ++v) rec(i + 1, left - v, prod * std::pow(sigma[i], static_cast<double>(v)));
  };
  rec(0, p, 1.0);
  return total;
}

double claim_sum_recursive(const std::vector<double>& sigma, std::size_t p) {
  // f[q] = F(current n, q)
  std::vector<double> f(p + 1, 0.0);
  f[0] = 1.0;
  for (double s : sigma) {
    std::vector<double> next = f;
    for (std::size_t q = 2; q <= p; ++q)
      for (std::size_t a = 2; a <= q; ++a) next[q] += f[q - a] * std::pow(s, static_cast<double>(a));
    f = std::move(next);
  }
  return f[p];
}

TailReport claim_sum_check(std::size_t max_n, std::size_t max_p, const RngStream& stream) {
  RngStream g = stream.derive(0xA1);
  std::size_t instances = 0, failures = 0;
  double worst = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::vector<std::vector<double>> cases;
    cases.push_back(std::vector<double>(n, 1.0));
    std::vector<double> dominant(n, 0.01);
    dominant[0] = 100.0;
    cases.push_back(dominant);
    for (int r = 0; r < 20; ++r) {
      std::vector<double> s(n);
      for (double& v : s) v = 0.05 + 3.0 * g.next_uniform();
      cases.push_back(s);
    }
    for (const auto& s : cases) {
      double s2 = 0.0;
      for (double v : s) s2 += v * v;
      for (std::size_t p = 0; p <= max_p; ++p) {
        const double f = claim_sum_enumerate(s, p);
        const double rec = claim_sum_recursive(s, p);
        const double bound = std::pow(9.0 * s2, static_cast<double>(p) / 2.0);
        ++instances;
        const bool agree = std::abs(f - rec) <= 1e-12 * std::max(1.0, std::abs(f));
        if (f > bound || !agree) ++failures;
        worst = std::max(worst, f / bound);
      }
    }
  }
  TailReport r;
  r.id = "claim_sum_enumeration";
  r.kind = "enumeration";
  r.trials = instances;
  r.failures = failures;
  r.empirical = worst;
  r.bound = 1.0;
  r.std_error = 0.0;
  r.params = {{"max_n", static_cast<double>(max_n)}, {"max_p", static_cast<double>(max_p)}};
  r.pass = failures == 0 && worst <= 1.0;
  return r;
}

SmallestK smallest_k_matrix_project(double eps, double eta, std::size_t trials, const RngStream& stream,
                                    std::size_t max_k) {
  SmallestK out;
  for (std::size_t k = 1; k <= max_k; k *= 2) {
    MatrixTailOptions o;
    o.k_override = k;
    const TailReport r = mc_matrix_project_tail(eps, eta, trials, stream, o);
    out.grid.emplace_back(k, r.empirical);
    if (r.pass) {
      out.smallest = k;
      break;
    }
  }
  return out;
}

std::vector<TailReport> run_verify_suite(std::uint64_t seed, const VerifyOptions& options) {
  const auto n = [&](double base) { return std::max<std::size_t>(100, static_cast<std::size_t>(base * options.scale)); };
  const auto stream = [&](std::uint64_t id) { return RngStream(seed, mix64(0x564552 + id)); };
  std::vector<TailReport> out;

  VectorSchemesReport vs = mc_vector_schemes(10000, 0.1, 0.25, n(1e4), stream(1));
  out.push_back(vs.compress);
  out.push_back(vs.nnz);
  out.push_back(vs.project);
  VectorSchemesReport adv = mc_vector_schemes(10000, 0.1, 0.25, n(1e4), stream(2), true);
  out.push_back(adv.compress);

  out.push_back(mc_matrix_project_tail(0.25, 0.01, n(1e4), stream(3)));
  MatrixTailOptions rows;
  rows.u_rows = 4;
  TailReport mrows = mc_matrix_project_tail(0.25, 0.01, n(1e4), stream(4), rows);
  mrows.id = "matrix_project_tail_matrix_u";
  out.push_back(mrows);

  ConvTailOptions uniform;
  TailReport cu = mc_conv_delta_tail(0.5, 0.05, n(5000), stream(5), uniform);
  cu.id = "conv_delta_tail_uniform_u";
  out.push_back(cu);
  ConvTailOptions single;
  single.u_shape = UShape::SinglePixel;
  TailReport cs = mc_conv_delta_tail(0.5, 0.05, n(5000), stream(6), single);
  cs.id = "conv_delta_tail_single_pixel_u";
  out.push_back(cs);

  const std::vector<double> sigma{1.0, 0.5, 2.0, 1.5, 0.75, 1.0, 0.25, 1.25};
  std::uint64_t sid = 10;
  for (PwiseConstruction c : {PwiseConstruction::Independent, PwiseConstruction::Subspace}) {
    for (std::size_t p : {2, 4}) {
      PwiseReport r = mc_pwise_moments(c, p, sigma, n(2e4), stream(sid++));
      out.push_back(r.moment);
      for (const auto& t : r.tails) out.push_back(t);
      if (p == 2) out.push_back(r.correlation);
      PwiseOptions vo;
      vo.vector_dim = 4;
      vo.construction = c;
      PwiseReport v = mc_pwise_moments(c, p, sigma, n(2e4), stream(sid++), vo);
      out.push_back(v.moment);
      for (const auto& t : v.tails) out.push_back(t);
    }
  }
  out.push_back(claim_sum_check(6, 4, stream(30)));
  return out;
}

}  // namespace nscomp
