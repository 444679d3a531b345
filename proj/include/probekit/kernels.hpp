#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

// Data-parallel reductions shared by the probing code paths. Each kernel
// splits rows into fixed-size blocks, computes per-block partials in
// parallel, then combines them serially in block order. Because the block
// layout depends only on n, results are bit-identical for any thread count.
// The plain row-at-a-time implementations live in kernels::ref; tests compare
// the two and the benchmark times them against each other.
namespace probekit::kernels {

// Effective thread count: min(PROBEKIT_THREADS, OpenMP max); unset or 0
// means the OpenMP default. Always 1 when built without OpenMP.
int thread_count();
bool has_openmp();

struct GlmStats {
  double value = 0;       // regularized mean loss
  Eigen::VectorXd grad_w;
  double grad_b = 0;
};

struct SoftmaxStats {
  double value = 0;
  Eigen::MatrixXd grad_W;  // C x d
  Eigen::VectorXd grad_b;  // C
};

struct WeightedGram {
  Eigen::MatrixXd xtsx;  // X^T diag(s) X
  Eigen::VectorXd xts;   // X^T s
  double s_sum = 0;
};

struct CosineStats {
  double sum = 0;
  std::int64_t count = 0;
  std::int64_t skipped = 0;               // pairs with a zero-norm member
  std::array<std::int64_t, 40> hist{};    // equal-width bins over [-1, 1]
};

struct PairDist {
  double sum = 0;
  std::int64_t count = 0;
};

using PairList = std::vector<std::pair<std::int64_t, std::int64_t>>;

// mean negative log-likelihood of y in {0,1} under sigmoid(Xw + b), plus
// (l2/2)||w||^2; mu_out, when given, receives the fitted probabilities
GlmStats logistic_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           double b, double l2, Eigen::VectorXd* mu_out = nullptr);

// mean Poisson unit deviance (factor 2 convention) under mu = exp(Xw + b),
// plus (l2/2)||w||^2
GlmStats poisson_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          double b, double l2, Eigen::VectorXd* mu_out = nullptr);

// mean categorical cross-entropy under softmax(XW^T + b), plus (l2/2)||W||_F^2
SoftmaxStats softmax_obj_grad(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                              const Eigen::VectorXd& b, double l2);

WeightedGram weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& s);

// (X - 1 mean)^T (X - 1 mean) without materializing the centered matrix
Eigen::MatrixXd gram_centered(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& mean);

// X W^T + 1 b^T, blocked so Eigen never runs its own threaded GEMM
Eigen::MatrixXd linear_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const Eigen::VectorXd& b);

// X^T v
Eigen::VectorXd matvec_t(const Eigen::MatrixXd& X, const Eigen::VectorXd& v);

Eigen::VectorXd row_norms(const Eigen::MatrixXd& X);

// cosine similarity over an explicit pair list; norms = row_norms(V)
CosineStats cosine_pairs(const Eigen::MatrixXd& V, const Eigen::VectorXd& norms, const PairList& pairs);

// sum of Euclidean distances over all unordered row pairs
PairDist mean_pairwise_distance(const Eigen::MatrixXd& X);

namespace ref {
GlmStats logistic_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           double b, double l2, Eigen::VectorXd* mu_out = nullptr);
GlmStats poisson_obj_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                          double b, double l2, Eigen::VectorXd* mu_out = nullptr);
SoftmaxStats softmax_obj_grad(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                              const Eigen::VectorXd& b, double l2);
WeightedGram weighted_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& s);
Eigen::MatrixXd gram_centered(const Eigen::MatrixXd& X, const Eigen::RowVectorXd& mean);
Eigen::MatrixXd linear_scores(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const Eigen::VectorXd& b);
Eigen::VectorXd matvec_t(const Eigen::MatrixXd& X, const Eigen::VectorXd& v);
Eigen::VectorXd row_norms(const Eigen::MatrixXd& X);
CosineStats cosine_pairs(const Eigen::MatrixXd& V, const Eigen::VectorXd& norms, const PairList& pairs);
PairDist mean_pairwise_distance(const Eigen::MatrixXd& X);
}  // namespace ref

}  // namespace probekit::kernels
