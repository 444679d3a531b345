#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probekit/probes.hpp"

namespace probekit {

struct PairEmbeddings {
  Eigen::MatrixXd Z;   // N x d sources
  Eigen::MatrixXd Zp;  // N x d targets, row-aligned
  std::string group;

  std::size_t n() const { return static_cast<std::size_t>(Z.rows()); }
};

// V[i] = Z[i] - Zp[i]
Eigen::MatrixXd diff_vectors(const PairEmbeddings& pe);

struct CosineSummary {
  double mean = 0;
  std::array<std::int64_t, 40> hist{};  // uniform bins over [-1, 1]
  std::int64_t pairs_used = 0;
  std::int64_t zero_rows_excluded = 0;
  bool sampled = false;  // true when max_pairs kicked in
};

// Mean cosine over all unordered row pairs; when that count exceeds
// max_pairs, a seeded uniform sample of max_pairs pairs (drawn with
// replacement from the pair space) is used instead.
CosineSummary pairwise_cosine_stats(const Eigen::MatrixXd& V, std::optional<std::size_t> max_pairs,
                                    std::uint64_t seed);

// Midpoint centering: rows 0..N-1 hold (z_i - z'_i)/2, rows N..2N-1 the
// exact negations.
Eigen::MatrixXd center_pairs(const PairEmbeddings& pe);

struct PcaResult {
  Eigen::MatrixXd components;                // k x d, orthonormal rows
  Eigen::VectorXd explained_variance_ratio;  // eigenvalue / total trace
  Eigen::MatrixXd projections;               // m x k
};

PcaResult pca(const Eigen::MatrixXd& X, int k);

struct AteResult {
  Eigen::VectorXd v_ate;
  double c_ate_pair = 0;        // NaN when v_ate is the zero vector
  std::size_t skipped_rows = 0; // zero-length v_i excluded from the mean
};

AteResult ate(const PairEmbeddings& pe);

struct PairProbeResult {
  double auc = 0;
  std::size_t n_train_pairs = 0, n_test_pairs = 0;
  bool converged = false;
};

// Sources labeled 1, targets 0; the split is BY PAIR so both members of a
// pair land on the same side; returns held-out AUC.
PairProbeResult pairwise_linear_probe(const PairEmbeddings& pe, const SplitSpec& split, const FitOptions& opts);

struct CausalMatrix {
  std::vector<std::string> groups;      // row labels
  std::vector<std::string> properties;  // column labels
  Eigen::MatrixXd raw;                  // mean q_y(z_i) - q_y(z'_i)
  Eigen::MatrixXd centered;             // raw with per-column mean across groups removed
  std::vector<std::pair<std::string, std::string>> omitted;  // (group, reason)
};

// probes must be binary-logit probes; entry (g, y) uses probe y's predicted
// class-1 probability.
CausalMatrix causal_effect_matrix(const std::vector<std::pair<std::string, LinearProbe>>& probes,
                                  const std::map<std::string, PairEmbeddings>& pairs_by_group);

struct Oversmoothing {
  double value = 0;
  std::size_t skipped = 0;  // graphs with < 2 nodes
};

// Mean over graphs of the mean pairwise node-feature distance.
Oversmoothing oversmoothing_metric(const std::vector<Eigen::MatrixXd>& node_embeddings);

double correlation(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys);

struct PairwiseOptions {
  std::optional<std::size_t> max_pairs = 1000000;
  std::uint64_t seed = 0;
  double test_frac = 0.2;
  FitOptions fit;
  int pca_k = 2;
};

struct PairwiseReport {
  std::string group;
  std::size_t n_pairs = 0;
  CosineSummary cosine;
  Eigen::VectorXd v_ate;
  double c_ate_pair = 0;
  std::size_t ate_skipped = 0;
  PcaResult pca;
  PairProbeResult probe;
};

// The full pairwise analysis: diff vectors, cosine stats, midpoint-centered
// PCA, ATE direction consistency and the pairwise probe.
PairwiseReport analyze_pairs(const PairEmbeddings& pe, const PairwiseOptions& opts);

}  // namespace probekit
