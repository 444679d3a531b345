#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "probekit/core.hpp"

namespace probekit {

enum class Link { Logit, Identity, Log };

struct LinearProbe {
  Eigen::MatrixXd W;       // 1 x d, or C x d for categorical with C > 2
  Eigen::VectorXd bias;    // one entry per row of W
  Link link = Link::Identity;
  int n_classes = 0;       // 2 for binary, C for categorical, 0 for regression
  double l2 = 0;
  Standardizer standardizer;
  bool converged = true;
  int iterations = 0;

  // parameters mapped back to the unstandardized input space
  Eigen::MatrixXd weights_original() const;
  Eigen::VectorXd bias_original() const;
};

struct FitOptions {
  int max_iter = 200;
  double tol = 1e-6;  // gradient infinity-norm
  double l2 = 1.0;
  std::uint64_t seed = 0;  // reserved; fits are zero-initialized and deterministic
};

// How run_linear_probing splits each joined dataset. A concrete Split cannot
// be shared across properties because the joined row count differs per
// property (missing labels drop rows), so the splitting rule is passed
// instead and applied after each join.
struct SplitSpec {
  double test_frac = 0.2;
  std::uint64_t seed = 0;
  bool stratify = true;  // applies to binary/categorical kinds only
};

struct ProbeRunOptions {
  FitOptions glm;         // logistic and Poisson probes
  double ridge_l2 = 1e-6;
};

struct ReportRow {
  std::string property;
  std::string metric;  // "auc", "r2" or "accuracy"
  double value = 0;    // NaN means N/A
  std::size_t n_train = 0, n_test = 0;
  bool converged = false;
  std::string reason;  // empty on success
};

// Binary y in {0,1} -> damped Newton on the sigmoid NLL. Categorical y in
// {0..C-1} -> multinomial softmax via L-BFGS. n_classes overrides the
// inferred class count (needed when a subsample misses a class).
LinearProbe fit_logistic(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const FitOptions& opts,
                         int n_classes = 0);

// Exact ridge solution of (Zc^T Zc + n*l2*I) w = Zc^T yc on centered,
// standardized data; l2 = 0 is allowed only for well-conditioned systems.
LinearProbe fit_linear(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double l2);

// Poisson GLM with log link, damped Newton on the mean unit deviance.
LinearProbe fit_poisson(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const FitOptions& opts);

// Logit link: probability of class 1 (binary) or predicted class index
// (categorical). Identity: linear score. Log: exp(score).
Eigen::VectorXd predict(const LinearProbe& probe, const Eigen::MatrixXd& Z);

// n x C matrix of class probabilities; rows sum to 1. Classification links only.
Eigen::MatrixXd predict_proba(const LinearProbe& probe, const Eigen::MatrixXd& Z);

// Mann-Whitney AUC with tie averaging, O(n log n).
double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// One row per property; per-property failures land in the row's reason
// instead of aborting the batch.
std::vector<ReportRow> run_linear_probing(const EmbeddingTable& emb, const LabelTable& labels,
                                          const std::vector<std::string>& properties, const SplitSpec& split,
                                          const ProbeRunOptions& opts);

// CSV `property,metric,value,n_train,n_test,converged,reason`; NaN values
// serialize as NA. The JSON form is an array of row objects, NaN as null.
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);
std::string report_json(const std::vector<ReportRow>& rows);

}  // namespace probekit
