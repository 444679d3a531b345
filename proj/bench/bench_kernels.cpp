// Times the blocked OpenMP kernels against the serial reference versions and
// checks that both agree on the benchmark inputs. The two sum in different
// orders, so agreement is up to rounding, not bit for bit.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "probekit/kernels.hpp"
#include "probekit/rng.hpp"

namespace {

using namespace probekit;
using Clock = std::chrono::steady_clock;

double time_ms(int reps, const auto& fn) {
  fn();  // warm-up, also the correctness run
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

constexpr double kRelTol = 1e-8;

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

template <typename A, typename B>
double rel_diff_m(const A& a, const B& b) {
  const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

void row(const std::string& name, double par_ms, double ref_ms, double rel, bool ints_ok = true) {
  const bool ok = ints_ok && rel <= kRelTol;
  std::printf("%-24s %10.2f ms %10.2f ms %8.2fx  %s (max rel diff %.2e)\n", name.c_str(), par_ms,
              ref_ms, ref_ms / (par_ms > 0 ? par_ms : 1e-9), ok ? "agree" : "MISMATCH", rel);
  if (!ok) std::exit(1);
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::Index n = 200000, d = 128;
  int reps = 5;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    const long v = std::atol(argv[i + 1]);
    if (flag == "--n") n = v;
    else if (flag == "--d") d = v;
    else if (flag == "--reps") reps = static_cast<int>(v);
    else {
      std::fprintf(stderr, "usage: %s [--n N] [--d D] [--reps R]\n", argv[0]);
      return 2;
    }
  }

  std::printf("n=%lld d=%lld reps=%d threads=%d (openmp %s)\n\n", static_cast<long long>(n),
              static_cast<long long>(d), reps, kernels::thread_count(), kernels::has_openmp() ? "on" : "off");
  std::printf("%-24s %13s %13s %9s\n", "kernel", "parallel", "serial ref", "speedup");

  Rng rng(7);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.gauss();
  Eigen::VectorXd y(n), w(d), s(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = static_cast<double>(rng.below(2));
  for (Eigen::Index i = 0; i < n; ++i) s(i) = 0.25 * rng.unit();
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.gauss();
  for (Eigen::Index j = 0; j < d; ++j) w(j) = 0.05 * rng.gauss();

  {
    kernels::GlmStats a, b;
    const double pt = time_ms(reps, [&] { a = kernels::logistic_obj_grad(X, y, w, 0.1, 1.0); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::logistic_obj_grad(X, y, w, 0.1, 1.0); });
    row("logistic_obj_grad", pt, rt,
        std::max({rel_diff(a.value, b.value), rel_diff_m(a.grad_w, b.grad_w), rel_diff(a.grad_b, b.grad_b)}));
  }
  {
    kernels::GlmStats a, b;
    const double pt = time_ms(reps, [&] { a = kernels::poisson_obj_grad(X, y, w, 0.1, 1.0); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::poisson_obj_grad(X, y, w, 0.1, 1.0); });
    row("poisson_obj_grad", pt, rt,
        std::max({rel_diff(a.value, b.value), rel_diff_m(a.grad_w, b.grad_w), rel_diff(a.grad_b, b.grad_b)}));
  }
  {
    const int C = 5;
    std::vector<int> yc(static_cast<std::size_t>(n));
    Rng r2(9);
    for (auto& c : yc) c = static_cast<int>(r2.below(C));
    const Eigen::MatrixXd W = Eigen::MatrixXd::NullaryExpr(C, d, [&](Eigen::Index, Eigen::Index) { return 0.05; });
    const Eigen::VectorXd b0 = Eigen::VectorXd::Zero(C);
    kernels::SoftmaxStats a, b;
    const double pt = time_ms(reps, [&] { a = kernels::softmax_obj_grad(X, yc, W, b0, 1.0); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::softmax_obj_grad(X, yc, W, b0, 1.0); });
    row("softmax_obj_grad", pt, rt,
        std::max({rel_diff(a.value, b.value), rel_diff_m(a.grad_W, b.grad_W), rel_diff_m(a.grad_b, b.grad_b)}));
  }
  {
    kernels::WeightedGram a, b;
    const double pt = time_ms(reps, [&] { a = kernels::weighted_gram(X, s); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::weighted_gram(X, s); });
    row("weighted_gram", pt, rt,
        std::max({rel_diff_m(a.xtsx, b.xtsx), rel_diff_m(a.xts, b.xts), rel_diff(a.s_sum, b.s_sum)}));
  }
  {
    const Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd a, b;
    const double pt = time_ms(reps, [&] { a = kernels::gram_centered(X, mean); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::gram_centered(X, mean); });
    row("gram_centered", pt, rt, rel_diff_m(a, b));
  }
  {
    Eigen::VectorXd a, b;
    const double pt = time_ms(reps, [&] { a = kernels::matvec_t(X, v); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::matvec_t(X, v); });
    row("matvec_t", pt, rt, rel_diff_m(a, b));
  }
  {
    Eigen::VectorXd a, b;
    const double pt = time_ms(reps, [&] { a = kernels::row_norms(X); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::row_norms(X); });
    row("row_norms", pt, rt, rel_diff_m(a, b));
  }
  {
    const Eigen::VectorXd norms = kernels::row_norms(X);
    kernels::PairList pairs;
    Rng r3(11);
    pairs.reserve(2000000);
    for (int k = 0; k < 2000000; ++k) {
      const auto i = static_cast<std::int64_t>(r3.below(static_cast<std::uint64_t>(n)));
      const auto j = static_cast<std::int64_t>(r3.below(static_cast<std::uint64_t>(n)));
      if (i != j) pairs.emplace_back(i, j);
    }
    kernels::CosineStats a, b;
    const double pt = time_ms(reps, [&] { a = kernels::cosine_pairs(X, norms, pairs); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::cosine_pairs(X, norms, pairs); });
    row("cosine_pairs", pt, rt, rel_diff(a.sum, b.sum),
        a.count == b.count && a.skipped == b.skipped && a.hist == b.hist);
  }
  {
    const Eigen::MatrixXd Xs = X.topRows(std::min<Eigen::Index>(n, 3000));
    kernels::PairDist a, b;
    const double pt = time_ms(reps, [&] { a = kernels::mean_pairwise_distance(Xs); });
    const double rt = time_ms(reps, [&] { b = kernels::ref::mean_pairwise_distance(Xs); });
    row("mean_pairwise_distance", pt, rt, rel_diff(a.sum, b.sum), a.count == b.count);
  }

  std::printf("\nall kernels agree with the serial reference\n");
  return 0;
}
