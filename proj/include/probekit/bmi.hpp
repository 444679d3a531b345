#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "probekit/core.hpp"
#include "probekit/probes.hpp"

namespace probekit {

struct BmiPoint {
  std::size_t n_train = 0;
  double h_p = 0;          // nats
  double h_p_given_z = 0;  // nats
  double bmi = 0;          // h_p - h_p_given_z, negative values kept
};

struct BmiSkipped {
  std::size_t n_train = 0;
  std::string reason;
};

struct BmiCurve {
  std::vector<BmiPoint> points;  // ascending n_train
  std::vector<BmiSkipped> skipped;
  Eigen::VectorXd alpha;
  double l2 = 0;
  std::uint64_t seed = 0;
  std::size_t clamp_events = 0;  // predicted probabilities clamped at 1e-12
};

double digamma(double x);

// Posterior-expected entropy of a Categorical under Dirichlet(alpha + counts):
// with A = sum(alpha_c + n_c), H = psi(A+1) - sum_c ((alpha_c+n_c)/A) psi(alpha_c+n_c+1).
double entropy_dirichlet(const Eigen::VectorXd& counts, const Eigen::VectorXd& alpha);

struct CondEntropy {
  double nats = 0;
  std::size_t clamped = 0;  // rows whose true-label probability hit the 1e-12 floor
};

// Mean -ln q(p_i | z_i) of the probe's predicted probabilities over eval.
CondEntropy conditional_entropy(const LinearProbe& probe, const ProbingDataset& eval);

// Incremental probing: for each size m, subsample m training rows
// (stratified, substream-seeded), fit an L2 logistic probe, take H(P) from
// the subsample's label counts and H(P|Z) on the fixed held-out eval split.
BmiCurve bmi_curve(const ProbingDataset& ds, const std::vector<std::size_t>& sizes, const Split& eval_split,
                   const Eigen::VectorXd& alpha, double l2, std::uint64_t seed);

}  // namespace probekit
