#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nscomp/numkit/rng.hpp"

namespace nscomp {

// One Monte Carlo check. For tail checks `empirical` is a failure rate and
// std_error the binomial standard error at the theoretical rate; for moment,
// mean and correlation checks it is the estimate and its standard error.
struct TailReport {
  std::string id;
  std::string kind = "tail";  // tail | moment | mean | correlation | enumeration
  std::size_t trials = 0;
  double threshold = 0.0;
  std::size_t failures = 0;
  double empirical = 0.0;
  double bound = 0.0;
  double std_error = 0.0;
  bool pass = false;
  bool gate = true;  // informational reports never fail the suite
  std::vector<std::pair<std::string, double>> params;

  // pass = empirical <= bound + 3 std_error.
  void decide();
};

double binomial_stderr(double p, std::size_t n);

struct MatrixTailOptions {
  std::size_t rows = 20, cols = 30;
  std::size_t u_rows = 1;  // rows of U; the bound is eta * u_rows
  std::size_t k_override = 0;
};

// Fixed (U, x, A); failure iff ||U (A_hat - A) x|| > eps ||A||_F ||U||_F ||x||.
TailReport mc_matrix_project_tail(double eps, double eta, std::size_t trials, const RngStream& stream,
                                  const MatrixTailOptions& options = {});

enum class UShape { Uniform, SinglePixel, Random };

struct ConvTailOptions {
  std::size_t in_channels = 2, out_channels = 2, width = 2, stride = 1, input_size = 5;
  std::size_t u_outputs = 1;  // n_u; the bound is eta * n_u
  UShape u_shape = UShape::Uniform;
  bool zero_filter = false;
  double q_constant = 4.0;
};

// Fixed (U, V, A); failure iff ||U x_3 (Delta *_s V)|| > eps beta / sqrt(n1' n2') ||A||_F ||U||_F ||V||_F.
TailReport mc_conv_delta_tail(double eps, double eta, std::size_t trials, const RngStream& stream,
                              const ConvTailOptions& options = {});

enum class PwiseConstruction { Independent, Subspace };

struct PwiseOptions {
  PwiseConstruction construction = PwiseConstruction::Subspace;
  std::size_t ambient = 32;     // dimension the subspace lives in
  std::size_t vector_dim = 0;   // 0: scalar summands; else vector summands of this length
};

struct PwiseReport {
  TailReport moment;                  // E|X - EX|^p vs (3 sigma)^p (2p)^p
  std::vector<TailReport> tails;      // t = 2, 4: Pr[|X - EX| >= 6 sigma p t] vs 1/t^p
  TailReport correlation;             // |corr(X_1, X_2)| vs 4/sqrt(N)
};

// Summands X_i = sigma_i <u, M'_i><v, M'_i> with M'_i scaled projections of
// Gaussians into one random p-dimensional subspace per trial (Independent:
// plain Gaussians).
PwiseReport mc_pwise_moments(PwiseConstruction construction, std::size_t p, const std::vector<double>& sigma,
                             std::size_t trials, const RngStream& stream, const PwiseOptions& options = {});

struct VectorSchemesReport {
  TailReport compress;
  TailReport project;
  TailReport nnz;  // mean nonzeros of Vector-Compress vs 2/(eta gamma^2)
};

// Fixed unit (c, u). Vector-Project uses the exact joint law of
// (<c, v_t>, <u, v_t>) instead of materializing each v_t.
VectorSchemesReport mc_vector_schemes(std::size_t h, double gamma, double eta, std::size_t trials,
                                      const RngStream& stream, bool adversarial_u = false);

// F(n, p) = sum over a in A_{n,p} of prod sigma_i^{a_i}, by enumeration.
double claim_sum_enumerate(const std::vector<double>& sigma, std::size_t p);
// Same value from the recursion F(n,p) = F(n-1,p) + sum_{a>=2} F(n-1,p-a) sigma_n^a.
double claim_sum_recursive(const std::vector<double>& sigma, std::size_t p);
// Checks F <= (9 sum sigma^2)^{p/2} for all n <= max_n, p <= max_p on seeded and extreme sigma.
TailReport claim_sum_check(std::size_t max_n, std::size_t max_p, const RngStream& stream);

struct SmallestK {
  std::vector<std::pair<std::size_t, double>> grid;  // (k, failure rate)
  std::size_t smallest = 0;                          // 0: none met the bound
};
// Powers of 2 for k until the Matrix-Project tail meets eta + 3 stderr.
SmallestK smallest_k_matrix_project(double eps, double eta, std::size_t trials, const RngStream& stream,
                                    std::size_t max_k = 1024);

struct VerifyOptions {
  double scale = 1.0;  // trial-count multiplier
};

std::vector<TailReport> run_verify_suite(std::uint64_t seed, const VerifyOptions& options = {});

}  // namespace nscomp
