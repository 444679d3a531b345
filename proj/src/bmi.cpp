#include "probekit/bmi.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"

namespace probekit {

// Recurrence up the axis, then the asymptotic series. Accurate to ~1e-14 for
// x > 0, which the entropy tests rely on.
double digamma(double x) {
  if (!(x > 0)) fail("digamma requires x > 0");
  double result = 0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/2x - sum B_2k / (2k x^{2k})
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

double entropy_dirichlet(const Eigen::VectorXd& counts, const Eigen::VectorXd& alpha) {
  if (counts.size() != alpha.size()) fail("entropy_dirichlet: counts/alpha size mismatch");
  if (counts.size() < 1) fail("entropy_dirichlet: need at least one class");
  double total = 0;
  for (Eigen::Index c = 0; c < counts.size(); ++c) {
    if (!(alpha(c) > 0)) fail("entropy_dirichlet: alpha entries must be > 0");
    if (counts(c) < 0) fail("entropy_dirichlet: negative count");
    total += counts(c);
  }
  if (total < 1) fail("entropy_dirichlet: need at least one observation");

  const double A = (counts + alpha).sum();
  double h = digamma(A + 1.0);
  for (Eigen::Index c = 0; c < counts.size(); ++c) {
    const double ac = alpha(c) + counts(c);
    h -= ac / A * digamma(ac + 1.0);
  }
  return h;
}

CondEntropy conditional_entropy(const LinearProbe& probe, const ProbingDataset& eval) {
  if (!eval.kind.is_classy()) fail("conditional_entropy needs a binary/categorical dataset");
  if (eval.n() < 1) fail("conditional_entropy: empty eval set");

  const Eigen::MatrixXd P = predict_proba(probe, eval.Z);
  CondEntropy out;
  double sum = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const double label = eval.p(i);
    if (std::floor(label) != label || label < 0 || label >= static_cast<double>(P.cols()))
      fail("conditional_entropy: label out of probe class range");
    double q = P(i, static_cast<Eigen::Index>(label));
    if (q < 1e-12) {
      q = 1e-12;
      ++out.clamped;
    }
    sum -= std::log(q);
  }
  out.nats = sum / static_cast<double>(P.rows());
  return out;
}

BmiCurve bmi_curve(const ProbingDataset& ds, const std::vector<std::size_t>& sizes, const Split& eval_split,
                   const Eigen::VectorXd& alpha, double l2, std::uint64_t seed) {
  if (!ds.kind.is_classy()) fail("bmi_curve needs a binary/categorical property");
  const int C = ds.kind.class_count();
  if (alpha.size() != C) fail("bmi_curve: alpha must have one entry per class");
  if (sizes.empty()) fail("bmi_curve: no sizes given");
  if (!std::is_sorted(sizes.begin(), sizes.end())) fail("bmi_curve: sizes must be ascending");
  if (eval_split.test_idx.empty()) fail("bmi_curve: eval split is empty");

  const ProbingDataset train_pool = take_rows(ds, eval_split.train_idx);
  const ProbingDataset eval = take_rows(ds, eval_split.test_idx);
  if (sizes.back() > train_pool.n())
    fail("bmi_curve: size " + std::to_string(sizes.back()) + " exceeds train pool of " +
         std::to_string(train_pool.n()));

  BmiCurve curve;
  curve.alpha = alpha;
  curve.l2 = l2;
  curve.seed = seed;

  FitOptions opts;
  opts.l2 = l2;

  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::size_t m = sizes[k];
    if (m < 2) {
      curve.skipped.push_back({m, "size must be at least 2"});
      continue;
    }
    const ProbingDataset sub = subsample(train_pool, m, substream_seed(seed, k));

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(C);
    for (Eigen::Index i = 0; i < sub.p.size(); ++i) counts(static_cast<Eigen::Index>(sub.p(i))) += 1.0;
    const double h_p = entropy_dirichlet(counts, alpha);

    try {
      const LinearProbe probe = fit_logistic(sub.Z, sub.p, opts, C);
      const CondEntropy ce = conditional_entropy(probe, eval);
      curve.clamp_events += ce.clamped;
      curve.points.push_back({m, h_p, ce.nats, h_p - ce.nats});
    } catch (const Error& e) {
      curve.skipped.push_back({m, e.what()});
    }
  }
  return curve;
}

}  // namespace probekit
