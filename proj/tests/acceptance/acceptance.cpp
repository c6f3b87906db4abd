// Acceptance suite: one PASS/FAIL line per criterion.
#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "nscomp/cli/experiment.hpp"
#include "nscomp/cli/fileio.hpp"
#include "nscomp/compressors/matrix.hpp"
#include "nscomp/conclab/conclab.hpp"
#include "nscomp/netlab/jacobian.hpp"
#include "nscomp/netlab/noise.hpp"
#include "nscomp/numkit/linalg.hpp"

using namespace nscomp;
namespace fs = std::filesystem;

namespace {

// C1
constexpr int kSvdCases = 100;
constexpr double kSvdSlack = 1e-9;
// C2
constexpr double kTailEps = 0.25;
constexpr double kTailEta = 0.01;
constexpr std::size_t kTailK = 74;
constexpr std::size_t kTailTrials = 10000;
constexpr double kTailThreshold = 0.013;
// C3
constexpr int kJacDense = 50;
constexpr int kJacConv = 10;
constexpr double kJacTol = 1e-6;
constexpr double kFdTol = 1e-4;
// C4
constexpr double kRebalanceFnTol = 1e-9;
constexpr double kRebalanceNormTol = 1e-8;
constexpr double kRebalanceScalarTol = 1e-6;
// C5
constexpr int kE2eRuns = 20;
constexpr int kE2eRequired = 18;
constexpr double kE2eDelta = 0.1;
// C6
constexpr double kAttenRelNorm = 0.1;
constexpr double kAttenLimit = 0.1;
// C10
constexpr std::uint64_t kPipelineSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double rel_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d) / std::max(norm2(b), 1e-300);
}

// Shared desk-scale experiments, trained once.
struct Desk {
  ExperimentConfig cfg;
  Dataset data;
  TrainedModel model;
};

const Desk& desk(bool conv) {
  static std::map<bool, Desk> cache;
  auto it = cache.find(conv);
  if (it == cache.end()) {
    Desk d;
    d.cfg = conv ? desk_conv_config(kPipelineSeed) : desk_mlp_config(kPipelineSeed);
    d.data = prepare_dataset(d.cfg);
    d.model = train_model(d.cfg, d.data);
    it = cache.emplace(conv, std::move(d)).first;
  }
  return it->second;
}

Outcome c1_svd() {
  RngStream s(101, 1);
  int ok = 0;
  double worst_gap = 0.0, worst_rank = 0.0;
  const double deltas[] = {0.1, 0.3, 0.5};
  for (int t = 0; t < kSvdCases; ++t) {
    const std::size_t rows = 20 + static_cast<std::size_t>(s.next_uniform() * 181);
    const std::size_t cols = 20 + static_cast<std::size_t>(s.next_uniform() * 181);
    DenseMatrix a = sample_gaussian(s, rows, cols);
    if (t % 2 == 1) {
      // Decaying column scales give a non-flat spectrum.
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) a(i, j) *= std::pow(0.9, static_cast<double>(j));
    }
    const double delta = deltas[t % 3];
    const SvdTruncation tr = svd_truncate(a, delta);
    const DenseMatrix diff = tr.product() - a;
    SpectralNormOptions so;
    so.tol = 1e-10;
    const double gap = spectral_norm(diff, so);
    const double fro = frobenius_norm(a);
    const double rank_cap = fro * fro / (delta * delta * tr.spectral * tr.spectral);
    worst_gap = std::max(worst_gap, gap / (delta * tr.spectral));
    worst_rank = std::max(worst_rank, static_cast<double>(tr.rank) / rank_cap);
    if (gap <= delta * tr.spectral * (1.0 + kSvdSlack) && static_cast<double>(tr.rank) <= rank_cap) ++ok;
  }
  return {ok == kSvdCases, std::to_string(ok) + "/" + std::to_string(kSvdCases) + " cases; max gap/(delta||A||) " +
                               fmt("%.4f", worst_gap) + ", max rank/cap " + fmt("%.4f", worst_rank)};
}

Outcome c2_tail() {
  MatrixTailOptions o;
  o.k_override = kTailK;
  if (matrix_project_k(kTailEps, kTailEta) != kTailK) return {false, "k formula does not give 74"};
  const TailReport r = mc_matrix_project_tail(kTailEps, kTailEta, kTailTrials, RngStream(202, 1), o);
  return {r.empirical <= kTailThreshold, "failure rate " + fmt("%.4f", r.empirical) + " over " +
                                             std::to_string(r.trials) + " draws (limit " +
                                             fmt("%.3f", kTailThreshold) + ")"};
}

Network random_dense(RngStream& s) {
  const std::size_t depth = 2 + static_cast<std::size_t>(s.next_uniform() * 4);
  std::vector<LayerSpec> arch;
  for (std::size_t k = 0; k < depth; ++k) arch.push_back({LayerSpec::Kind::Dense, 3 + static_cast<std::size_t>(s.next_uniform() * 18)});
  const std::size_t in = 3 + static_cast<std::size_t>(s.next_uniform() * 18);
  return init_network(Shape::flat(in), arch, s.derive(1));
}

Network random_conv(RngStream& s) {
  const std::size_t size = 7 + static_cast<std::size_t>(s.next_uniform() * 4);
  const std::size_t ch = 1 + static_cast<std::size_t>(s.next_uniform() * 3);
  std::vector<LayerSpec> arch = {{LayerSpec::Kind::Conv, 2 + static_cast<std::size_t>(s.next_uniform() * 3), 3, 1},
                                 {LayerSpec::Kind::Conv, 2 + static_cast<std::size_t>(s.next_uniform() * 3), 2,
                                  1 + static_cast<std::size_t>(s.next_uniform() * 2)},
                                 {LayerSpec::Kind::Dense, 4}};
  return init_network(Shape{ch, size, size}, arch, s.derive(1));
}

Outcome c3_jacobian() {
  RngStream s(303, 1);
  std::size_t checks = 0, bad = 0, fd_checks = 0, fd_bad = 0, fd_skipped = 0;
  double worst = 0.0, worst_fd = 0.0;
  for (int n = 0; n < kJacDense + kJacConv; ++n) {
    RngStream ns = s.derive(n);
    const Network net = n < kJacDense ? random_dense(ns) : random_conv(ns);
    std::vector<double> x(net.input_shape().size());
    for (double& v : x) v = ns.next_normal();
    const ActivationTrace tr = forward_trace(net, x);
    for (std::size_t i = 0; i <= net.depth(); ++i) {
      for (std::size_t j = i; j <= net.depth(); ++j) {
        const JacobianView jac = jacobian(net, tr, i, j);
        const std::vector<double> jx = jac.has_explicit() && !jac.explicit_matrix.empty()
                                           ? matvec(jac.explicit_matrix, tr.x[i])
                                           : apply_jacobian(jac, tr.x[i]);
        const double e = rel_vec(jx, tr.x[j]);
        worst = std::max(worst, e);
        ++checks;
        if (!(e <= kJacTol)) ++bad;

        if (j == i) continue;
        std::vector<double> v(tr.x[i].size());
        for (double& t : v) t = ns.next_normal();
        const double h = 1e-6 * std::max(1.0, norm2(tr.x[i])) / norm2(v);
        std::vector<double> xp = tr.x[i], xm = tr.x[i];
        for (std::size_t p = 0; p < v.size(); ++p) {
          xp[p] += h * v[p];
          xm[p] -= h * v[p];
        }
        // Skip points where the perturbation flips a ReLU between i and j.
        bool boundary = false;
        for (std::size_t k = std::max<std::size_t>(i, 1); k < j && !boundary; ++k) {
          const auto up = k == i ? xp : net.propagate(i, k, xp);
          const auto dn = k == i ? xm : net.propagate(i, k, xm);
          for (std::size_t p = 0; p < up.size(); ++p) {
            const bool on = tr.masks[k][p] != 0;
            if ((up[p] > 0) != on || (dn[p] > 0) != on) boundary = true;
          }
        }
        if (boundary) {
          ++fd_skipped;
          continue;
        }
        const auto fp = net.propagate(i, j, xp), fm = net.propagate(i, j, xm);
        std::vector<double> fd(fp.size());
        for (std::size_t p = 0; p < fp.size(); ++p) fd[p] = (fp[p] - fm[p]) / (2.0 * h);
        const std::vector<double> jv = apply_jacobian(jac, v);
        const double efd = norm2(jv) > 0 ? rel_vec(fd, jv) : norm2(fd);
        worst_fd = std::max(worst_fd, efd);
        ++fd_checks;
        if (!(efd <= kFdTol)) ++fd_bad;
      }
    }
  }
  return {bad == 0 && fd_bad == 0 && fd_checks > 0,
          std::to_string(checks - bad) + "/" + std::to_string(checks) + " J x^i = x^j (max rel " + fmt("%.2e", worst) +
              "), " + std::to_string(fd_checks - fd_bad) + "/" + std::to_string(fd_checks) +
              " finite differences (max rel " + fmt("%.2e", worst_fd) + ", " + std::to_string(fd_skipped) +
              " boundary points skipped)"};
}

Outcome c4_rebalance() {
  RngStream s(404, 1);
  double worst_fn = 0.0, worst_norm = 0.0, worst_scalar = 0.0;
  for (int n = 0; n < 6; ++n) {
    RngStream ns = s.derive(n);
    Network net = n < 4 ? random_dense(ns) : random_conv(ns);
    for (std::size_t i = 1; i <= net.depth(); ++i) scale_layer(net.mutable_layer(i), std::pow(10.0, 2.0 * ns.next_uniform() - 1.0));
    const Network bal = rebalance(net);
    std::vector<std::vector<double>> xs;
    for (int t = 0; t < 100; ++t) {
      std::vector<double> x(net.input_shape().size());
      for (double& v : x) v = ns.next_normal();
      worst_fn = std::max(worst_fn, rel_vec(bal.forward(x), net.forward(x)));
      if (t < 20) xs.push_back(std::move(x));
    }
    std::vector<double> norms;
    for (std::size_t i = 1; i <= bal.depth(); ++i) norms.push_back(layer_frobenius_norm(bal.layer(i)));
    for (double v : norms) worst_norm = std::max(worst_norm, rel(v, norms.front()));

    StabilityOptions o;
    o.smoothness.trials = 40;
    o.seed = 99;
    const StabilityReport a = measure_stability(net, xs, o), b = measure_stability(bal, xs, o);
    auto cmp = [&](const std::vector<double>& u, const std::vector<double>& v) {
      for (std::size_t i = 0; i < u.size(); ++i)
        if (std::isfinite(u[i]) || std::isfinite(v[i])) worst_scalar = std::max(worst_scalar, rel(u[i], v[i]));
    };
    cmp(a.mu, b.mu);
    cmp(a.mu_to, b.mu_to);
    cmp(a.beta, b.beta);
    cmp({a.c}, {b.c});
    cmp({a.rho.rho}, {b.rho.rho});
  }
  return {worst_fn <= kRebalanceFnTol && worst_norm <= kRebalanceNormTol && worst_scalar <= kRebalanceScalarTol,
          "function " + fmt("%.1e", worst_fn) + ", norms " + fmt("%.1e", worst_norm) + ", stability scalars " +
              fmt("%.1e", worst_scalar) + " (max relative changes)"};
}

Outcome c5_end_to_end() {
  const Desk& d = desk(false);
  if (d.model.accuracy < 1.0) return {false, "training accuracy " + fmt("%.4f", d.model.accuracy) + " < 1"};
  ExperimentConfig cfg = d.cfg;
  cfg.delta = kE2eDelta;
  const double gamma = resolve_gamma(cfg, d.model.net, d.data);
  const StabilityReport st = run_measure(cfg, d.model.net, d.data, false);
  int ok = 0;
  double worst = 0.0, eps = 0.0;
  for (int r = 0; r < kE2eRuns; ++r) {
    const CompressionOutcome c = run_compress(cfg, d.model.net, d.data, st, gamma, 5000 + r);
    eps = c.eps;
    worst = std::max(worst, c.max_distortion);
    if (c.max_distortion <= c.eps && c.loss0_compressed <= c.loss_gamma_original) ++ok;
  }
  return {ok >= kE2eRequired, std::to_string(ok) + "/" + std::to_string(kE2eRuns) + " runs within eps " +
                                  fmt("%.4f", eps) + " (gamma " + fmt("%.3f", gamma) + ", worst distortion " +
                                  fmt("%.2e", worst) + ")"};
}

Outcome c6_attenuation() {
  std::ostringstream detail;
  bool pass = true;
  for (bool conv : {false, true}) {
    const Desk& d = desk(conv);
    ExperimentConfig cfg = d.cfg;
    cfg.rel_norm = kAttenRelNorm;
    const auto trained = run_attenuation(cfg, d.model.net, d.data);
    const auto random = run_attenuation(cfg, d.model.init, d.data);
    detail << (conv ? " conv" : "mlp") << " trained/random output error:";
    for (std::size_t i = 0; i < trained.size(); ++i) {
      const double t = trained[i].back(), r = random[i].back();
      detail << " " << fmt("%.3f", t) << "/" << fmt("%.3f", r);
      if (i >= 1 && !(t < kAttenLimit)) pass = false;
      if (!(r > t)) pass = false;
    }
    detail << ";";
  }
  return {pass, detail.str()};
}

double median_finite(const std::vector<double>& v) {
  std::vector<double> w;
  for (double x : v)
    if (std::isfinite(x)) w.push_back(x);
  if (w.empty()) return std::nan("");
  std::sort(w.begin(), w.end());
  return w[w.size() / 2];
}

Outcome c7_cushions() {
  std::ostringstream detail;
  bool pass = true;
  for (bool conv : {false, true}) {
    const Desk& d = desk(conv);
    const auto xs = stability_samples(d.cfg, d.data);
    const auto t = layer_cushion_samples(d.model.net, xs), r = layer_cushion_samples(d.model.init, xs);
    std::size_t wins = 0;
    detail << (conv ? " conv" : "mlp") << " median trained/random:";
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double mt = median_finite(t[i]), mr = median_finite(r[i]);
      wins += mt > mr;
      detail << " " << fmt("%.3f", mt) << "/" << fmt("%.3f", mr);
    }
    const std::size_t depth = d.model.net.depth();
    detail << " (" << wins << "/" << depth << ");";
    if (wins + 1 < depth) pass = false;
  }
  return {pass, detail.str()};
}

Outcome c8_verify() {
  const auto reports = run_verify_suite(kPipelineSeed, {});
  std::size_t gated = 0, failed = 0;
  std::string names;
  for (const auto& r : reports) {
    if (!r.gate) continue;
    ++gated;
    if (!r.pass) {
      ++failed;
      names += " " + r.id + "(" + fmt("%.4g", r.empirical) + " vs " + fmt("%.4g", r.bound + 3 * r.std_error) + ")";
    }
  }
  return {failed == 0, std::to_string(gated - failed) + "/" + std::to_string(gated) + " checks pass" +
                           (failed ? "; failing:" + names : "")};
}

Outcome c9_ordering() {
  const Desk& d = desk(true);
  const double gamma = resolve_gamma(d.cfg, d.model.net, d.data);
  const StabilityReport st = run_measure(d.cfg, d.model.net, d.data, false);
  const BoundReport b = run_bound(d.cfg, d.model.net, d.data, st, gamma);
  const double ours = b.ours.capacity;
  const bool pass = ours < b.baselines.spec_l12 && ours < b.baselines.frobenius_prod && ours < b.baselines.spec_fro;
  return {pass, "ours " + fmt("%.3g", ours) + ", spec_l12 " + fmt("%.3g", b.baselines.spec_l12) + ", frobenius " +
                    fmt("%.3g", b.baselines.frobenius_prod) + ", spec_fro " + fmt("%.3g", b.baselines.spec_fro) +
                    " (l1inf " + fmt("%.3g", b.baselines.l1inf) + ", informational)"};
}

Outcome c10_determinism() {
  const fs::path root = fs::temp_directory_path() / "nscomp_acceptance_c10";
  fs::remove_all(root);
  const std::string cli = NSCOMP_CLI_PATH;
  auto run = [&](const std::string& dir, const std::string& env) {
    const std::string cmd = env + " \"" + cli + "\" pipeline --seed " + std::to_string(kPipelineSeed) + " --out \"" +
                            (root / dir).string() + "\" > /dev/null";
    return std::system(cmd.c_str());
  };
  if (run("a", "") != 0 || run("b", "") != 0 || run("c", "NS_THREADS=1") != 0 || run("d", "NS_THREADS=4") != 0) {
    return {false, "pipeline run failed"};
  }
  std::size_t files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const std::string ref = read_file(e.path().string());
    bool all = true;
    for (const char* other : {"b", "c", "d"}) all = all && read_file((root / other / e.path().filename()).string()) == ref;
    same += all;
  }
  fs::remove_all(root);
  return {files > 0 && same == files, std::to_string(same) + "/" + std::to_string(files) +
                                          " report files byte-identical across 2 runs and NS_THREADS=1,4"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> only;
  app.add_option("--only", only, "run only these criteria (C1..C10)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::tuple<std::string, std::string, std::function<Outcome()>>> criteria = {
      {"C1", "svd truncation", c1_svd},
      {"C2", "matrix-project tail", c2_tail},
      {"C3", "jacobian correctness", c3_jacobian},
      {"C4", "rebalance invariance", c4_rebalance},
      {"C5", "end-to-end compression", c5_end_to_end},
      {"C6", "attenuation", c6_attenuation},
      {"C7", "trained vs random cushions", c7_cushions},
      {"C8", "concentration suite", c8_verify},
      {"C9", "bound ordering", c9_ordering},
      {"C10", "determinism", c10_determinism},
  };
  int failures = 0, ran = 0;
  for (const auto& [id, title, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-3s %s %s: %s (%.1f s)\n", id.c_str(), o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matched --only\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
