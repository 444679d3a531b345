#include "probekit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "probekit/error.hpp"

namespace probekit::kernels {

namespace {

// Row blocks for vector-sized partials, coarse slices for d x d partials
// (keeps the partial buffers small). Both are compile-time constants so the
// combine order never depends on the machine.
constexpr Eigen::Index kRowBlock = 4096;
constexpr Eigen::Index kPairBlock = 1 << 16;
constexpr Eigen::Index kSlices = 16;

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct BlockRange {
  Eigen::Index lo, len;
};

std::vector<BlockRange> make_blocks(Eigen::Index n, Eigen::Index block) {
  std::vector<BlockRange> out;
  for (Eigen::Index lo = 0; lo < n; lo += block) out.push_back({lo, std::min(block, n - lo)});
  return out;
}

std::vector<BlockRange> make_slices(Eigen::Index n) {
  const Eigen::Index per = std::max<Eigen::Index>(1, (n + kSlices - 1) / kSlices);
  return make_blocks(n, per);
}

}  // namespace

bool has_openmp() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  int max = omp_get_max_threads();
  if (const char* env = std::getenv("PROBEKIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && cap < max) max = cap;
  }
  return std::max(1, max);
#else
  return 1;
#endif
}

GlmStats logistic_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           double b, double l2, Eigen::VectorXd* mu_out) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (y.size() != n) fail("logistic_obj_grad: y size mismatch");
  if (mu_out) mu_out->resize(n);

  struct Part {
    double loss = 0, gb = 0;
    Eigen::VectorXd gw;
  };
  const auto blocks = make_blocks(n, kRowBlock);
  std::vector<Part> parts(blocks.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    const auto Xb = X.middleRows(lo, len);
    Eigen::VectorXd eta = Xb * w;
    eta.array() += b;
    Eigen::VectorXd r(len);
    Part p;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double yi = y(lo + i);
      p.loss += softplus(eta(i)) - yi * eta(i);
      const double mu = sigmoid(eta(i));
      r(i) = mu - yi;
      if (mu_out) (*mu_out)(lo + i) = mu;
    }
    p.gw = Xb.transpose() * r;
    p.gb = r.sum();
    parts[static_cast<std::size_t>(bi)] = std::move(p);
  }

  GlmStats out;
  out.grad_w = Eigen::VectorXd::Zero(d);
  double loss = 0;
  for (const auto& p : parts) {
    loss += p.loss;
    out.grad_w += p.gw;
    out.grad_b += p.gb;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  out.grad_w = out.grad_w * inv_n + l2 * w;
  out.grad_b *= inv_n;
  return out;
}

GlmStats poisson_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          double b, double l2, Eigen::VectorXd* mu_out) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (y.size() != n) fail("poisson_obj_grad: y size mismatch");
  if (mu_out) mu_out->resize(n);

  struct Part {
    double loss = 0, gb = 0;
    Eigen::VectorXd gw;
  };
  const auto blocks = make_blocks(n, kRowBlock);
  std::vector<Part> parts(blocks.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    const auto Xb = X.middleRows(lo, len);
    Eigen::VectorXd eta = Xb * w;
    eta.array() += b;
    Eigen::VectorXd r(len);
    Part p;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double yi = y(lo + i);
      const double mu = std::exp(eta(i));
      const double ylog = yi > 0 ? yi * (std::log(yi) - eta(i)) : 0.0;
      p.loss += 2.0 * (ylog - yi + mu);
      r(i) = 2.0 * (mu - yi);
      if (mu_out) (*mu_out)(lo + i) = mu;
    }
    p.gw = Xb.transpose() * r;
    p.gb = r.sum();
    parts[static_cast<std::size_t>(bi)] = std::move(p);
  }

  GlmStats out;
  out.grad_w = Eigen::VectorXd::Zero(d);
  double loss = 0;
  for (const auto& p : parts) {
    loss += p.loss;
    out.grad_w += p.gw;
    out.grad_b += p.gb;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  out.grad_w = out.grad_w * inv_n + l2 * w;
  out.grad_b *= inv_n;
  return out;
}

SoftmaxStats softmax_obj_grad(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                              const Eigen::VectorXd& b, double l2) {
  const Eigen::Index n = X.rows(), d = X.cols(), C = W.rows();
  if (static_cast<Eigen::Index>(y.size()) != n) fail("softmax_obj_grad: y size mismatch");
  if (W.cols() != d || b.size() != C) fail("softmax_obj_grad: parameter shape mismatch");

  struct Part {
    double loss = 0;
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
  };
  const auto blocks = make_blocks(n, kRowBlock);
  std::vector<Part> parts(blocks.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    const auto Xb = X.middleRows(lo, len);
    Eigen::MatrixXd logits = Xb * W.transpose();
    logits.rowwise() += b.transpose();
    Part p;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double m = logits.row(i).maxCoeff();
      const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
      p.loss += lse - logits(i, y[static_cast<std::size_t>(lo + i)]);
      logits.row(i) = (logits.row(i).array() - lse).exp();  // row becomes probabilities
      logits(i, y[static_cast<std::size_t>(lo + i)]) -= 1.0;
    }
    p.gW = logits.transpose() * Xb;
    p.gb = logits.colwise().sum();
    parts[static_cast<std::size_t>(bi)] = std::move(p);
  }

  SoftmaxStats out;
  out.grad_W = Eigen::MatrixXd::Zero(C, d);
  out.grad_b = Eigen::VectorXd::Zero(C);
  double loss = 0;
  for (const auto& p : parts) {
    loss += p.loss;
    out.grad_W += p.gW;
    out.grad_b += p.gb;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * W.squaredNorm();
  out.grad_W = out.grad_W * inv_n + l2 * W;
  out.grad_b *= inv_n;
  return out;
}

WeightedGram weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& s) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (s.size() != n) fail("weighted_gram: weight size mismatch");

  struct Part {
    Eigen::MatrixXd xtsx;
    Eigen::VectorXd xts;
    double ssum = 0;
  };
  const auto slices = make_slices(n);
  std::vector<Part> parts(slices.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(slices.size()); ++bi) {
    const auto [lo, len] = slices[static_cast<std::size_t>(bi)];
    const auto Xb = X.middleRows(lo, len);
    const auto sb = s.segment(lo, len);
    Part p;
    p.xtsx = Xb.transpose() * sb.asDiagonal() * Xb;
    p.xts = Xb.transpose() * sb;
    p.ssum = sb.sum();
    parts[static_cast<std::size_t>(bi)] = std::move(p);
  }

  WeightedGram out;
  out.xtsx = Eigen::MatrixXd::Zero(d, d);
  out.xts = Eigen::VectorXd::Zero(d);
  for (const auto& p : parts) {
    out.xtsx += p.xtsx;
    out.xts += p.xts;
    out.s_sum += p.ssum;
  }
  return out;
}

Eigen::MatrixXd gram_centered(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& mean) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (mean.size() != d) fail("gram_centered: mean size mismatch");

  const auto slices = make_slices(n);
  std::vector<Eigen::MatrixXd> parts(slices.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(slices.size()); ++bi) {
    const auto [lo, len] = slices[static_cast<std::size_t>(bi)];
    const Eigen::MatrixXd Xc = X.middleRows(lo, len).rowwise() - mean;
    parts[static_cast<std::size_t>(bi)] = Xc.transpose() * Xc;
  }

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (const auto& p : parts) out += p;
  return out;
}

Eigen::MatrixXd linear_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  const Eigen::Index n = X.rows(), C = W.rows();
  if (W.cols() != X.cols() || b.size() != C) fail("linear_scores: shape mismatch");
  Eigen::MatrixXd out(n, C);
  const auto blocks = make_blocks(n, kRowBlock);

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    out.middleRows(lo, len) = (X.middleRows(lo, len) * W.transpose()).rowwise() + b.transpose();
  }
  return out;
}

Eigen::VectorXd matvec_t(const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (v.size() != n) fail("matvec_t: size mismatch");
  const auto blocks = make_blocks(n, kRowBlock);
  std::vector<Eigen::VectorXd> parts(blocks.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    parts[static_cast<std::size_t>(bi)] = X.middleRows(lo, len).transpose() * v.segment(lo, len);
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (const auto& p : parts) out += p;
  return out;
}

Eigen::VectorXd row_norms(const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  const auto blocks = make_blocks(X.rows(), kRowBlock);

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    out.segment(lo, len) = X.middleRows(lo, len).rowwise().norm();
  }
  return out;
}

namespace {

inline void cosine_accum(CosineStats& st, const Eigen::MatrixXd& V, const Eigen::VectorXd& norms,
                         std::int64_t a, std::int64_t b) {
  const double na = norms(a), nb = norms(b);
  if (na == 0.0 || nb == 0.0) {
    ++st.skipped;
    return;
  }
  double c = V.row(a).dot(V.row(b)) / (na * nb);
  c = std::clamp(c, -1.0, 1.0);
  st.sum += c;
  ++st.count;
  auto bin = static_cast<std::ptrdiff_t>((c + 1.0) * 0.5 * 40.0);
  bin = std::clamp<std::ptrdiff_t>(bin, 0, 39);
  ++st.hist[static_cast<std::size_t>(bin)];
}

void cosine_merge(CosineStats& out, const CosineStats& p) {
  out.sum += p.sum;
  out.count += p.count;
  out.skipped += p.skipped;
  for (std::size_t k = 0; k < p.hist.size(); ++k) out.hist[k] += p.hist[k];
}

}  // namespace

CosineStats cosine_pairs(const Eigen::MatrixXd& V, const Eigen::VectorXd& norms, const PairList& pairs) {
  if (norms.size() != V.rows()) fail("cosine_pairs: norms size mismatch");
  const auto blocks = make_blocks(static_cast<Eigen::Index>(pairs.size()), kPairBlock);
  std::vector<CosineStats> parts(blocks.size());

#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    CosineStats st;
    for (Eigen::Index k = lo; k < lo + len; ++k)
      cosine_accum(st, V, norms, pairs[static_cast<std::size_t>(k)].first, pairs[static_cast<std::size_t>(k)].second);
    parts[static_cast<std::size_t>(bi)] = st;
  }

  CosineStats out;
  for (const auto& p : parts) cosine_merge(out, p);
  return out;
}

PairDist mean_pairwise_distance(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) return {0.0, 0};
  const auto blocks = make_blocks(n - 1, 256);  // rows 0..n-2 each pair with all later rows
  std::vector<double> parts(blocks.size(), 0.0);

  // dynamic schedule because early rows pair with more partners; per-block
  // partials keep the result independent of the schedule anyway
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(blocks.size()); ++bi) {
    const auto [lo, len] = blocks[static_cast<std::size_t>(bi)];
    double s = 0;
    for (Eigen::Index i = lo; i < lo + len; ++i)
      s += (X.bottomRows(n - i - 1).rowwise() - X.row(i)).rowwise().norm().sum();
    parts[static_cast<std::size_t>(bi)] = s;
  }

  PairDist out;
  for (double s : parts) out.sum += s;
  out.count = static_cast<std::int64_t>(n) * (n - 1) / 2;
  return out;
}

// Plain row-at-a-time implementations. Kept deliberately simple; these are
// the correctness oracles for the blocked versions above.
namespace ref {

GlmStats logistic_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           double b, double l2, Eigen::VectorXd* mu_out) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (mu_out) mu_out->resize(n);
  GlmStats out;
  out.grad_w = Eigen::VectorXd::Zero(d);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = X.row(i).dot(w) + b;
    const double mu = sigmoid(eta);
    loss += softplus(eta) - y(i) * eta;
    const double r = mu - y(i);
    out.grad_w += r * X.row(i).transpose();
    out.grad_b += r;
    if (mu_out) (*mu_out)(i) = mu;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  out.grad_w = out.grad_w * inv_n + l2 * w;
  out.grad_b *= inv_n;
  return out;
}

GlmStats poisson_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          double b, double l2, Eigen::VectorXd* mu_out) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (mu_out) mu_out->resize(n);
  GlmStats out;
  out.grad_w = Eigen::VectorXd::Zero(d);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = X.row(i).dot(w) + b;
    const double mu = std::exp(eta);
    loss += 2.0 * ((y(i) > 0 ? y(i) * (std::log(y(i)) - eta) : 0.0) - y(i) + mu);
    const double r = 2.0 * (mu - y(i));
    out.grad_w += r * X.row(i).transpose();
    out.grad_b += r;
    if (mu_out) (*mu_out)(i) = mu;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  out.grad_w = out.grad_w * inv_n + l2 * w;
  out.grad_b *= inv_n;
  return out;
}

SoftmaxStats softmax_obj_grad(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                              const Eigen::VectorXd& b, double l2) {
  const Eigen::Index n = X.rows(), d = X.cols(), C = W.rows();
  SoftmaxStats out;
  out.grad_W = Eigen::MatrixXd::Zero(C, d);
  out.grad_b = Eigen::VectorXd::Zero(C);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd logits = W * X.row(i).transpose() + b;
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    loss += lse - logits(y[static_cast<std::size_t>(i)]);
    Eigen::VectorXd prob = (logits.array() - lse).exp();
    prob(y[static_cast<std::size_t>(i)]) -= 1.0;
    out.grad_W += prob * X.row(i);
    out.grad_b += prob;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = loss * inv_n + 0.5 * l2 * W.squaredNorm();
  out.grad_W = out.grad_W * inv_n + l2 * W;
  out.grad_b *= inv_n;
  return out;
}

WeightedGram weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& s) {
  const Eigen::Index n = X.rows(), d = X.cols();
  WeightedGram out;
  out.xtsx = Eigen::MatrixXd::Zero(d, d);
  out.xts = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.xtsx += s(i) * X.row(i).transpose() * X.row(i);
    out.xts += s(i) * X.row(i).transpose();
    out.s_sum += s(i);
  }
  return out;
}

Eigen::MatrixXd gram_centered(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& mean) {
  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd c = X.row(i) - mean;
    out += c.transpose() * c;
  }
  return out;
}

Eigen::MatrixXd linear_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
  Eigen::MatrixXd out(X.rows(), W.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = (W * X.row(i).transpose() + b).transpose();
  return out;
}

Eigen::VectorXd matvec_t(const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out += v(i) * X.row(i).transpose();
  return out;
}

Eigen::VectorXd row_norms(const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = X.row(i).norm();
  return out;
}

CosineStats cosine_pairs(const Eigen::MatrixXd& V, const Eigen::VectorXd& norms, const PairList& pairs) {
  CosineStats out;
  for (const auto& [a, b] : pairs) cosine_accum(out, V, norms, a, b);
  return out;
}

PairDist mean_pairwise_distance(const Eigen::MatrixXd& X) {
  PairDist out;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      out.sum += (X.row(i) - X.row(j)).norm();
      ++out.count;
    }
  return out;
}

}  // namespace ref

}  // namespace probekit::kernels
