#include "probekit/probes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <ostream>

#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/kernels.hpp"

namespace probekit {

namespace {

constexpr double kArmijoC1 = 1e-4;
constexpr double kEtaDivergence = 100.0;  // |eta| beyond this means exp() is astronomical

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void check_binary(const Eigen::VectorXd& y) {
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) has0 = true;
    else if (y(i) == 1.0) has1 = true;
    else fail("binary labels must be 0 or 1");
  }
  if (!has0 || !has1) fail("single-class labels: need both classes to fit");
}

// Damped Newton for the two GLMs. hess_weight maps a fitted mean to the
// per-row weight of the Hessian X^T diag(s) X / n.
template <typename ObjGrad, typename HessWeight>
std::pair<Eigen::VectorXd, double> newton_glm(const Eigen::MatrixXd& Zs, const FitOptions& opts, ObjGrad obj_grad,
                                              HessWeight hess_weight, bool guard_eta, bool* converged, int* iters) {
  const Eigen::Index d = Zs.cols();
  const double n = static_cast<double>(Zs.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0;
  Eigen::VectorXd mu;
  *converged = false;
  *iters = 0;

  kernels::GlmStats st = obj_grad(w, b, &mu);
  for (int it = 0; it < opts.max_iter; ++it) {
    *iters = it;
    const double gnorm = std::max(st.grad_w.lpNorm<Eigen::Infinity>(), std::abs(st.grad_b));
    if (gnorm <= opts.tol) {
      *converged = true;
      break;
    }

    Eigen::VectorXd s(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) s(i) = hess_weight(mu(i));
    const kernels::WeightedGram wg = kernels::weighted_gram(Zs, s);

    Eigen::MatrixXd H(d + 1, d + 1);
    H.topLeftCorner(d, d) = wg.xtsx / n;
    H.topLeftCorner(d, d).diagonal().array() += opts.l2;
    H.topRightCorner(d, 1) = wg.xts / n;
    H.bottomLeftCorner(1, d) = wg.xts.transpose() / n;
    H(d, d) = wg.s_sum / n;

    Eigen::VectorXd g(d + 1);
    g.head(d) = st.grad_w;
    g(d) = st.grad_b;

    Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite() || g.dot(step) >= 0) step = -g;  // fall back to steepest descent

    const double slope = g.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd w_try = w + t * step.head(d);
      const double b_try = b + t * step(d);
      Eigen::VectorXd mu_try;
      const kernels::GlmStats st_try = obj_grad(w_try, b_try, &mu_try);
      if (std::isfinite(st_try.value) && st_try.value <= st.value + kArmijoC1 * t * slope) {
        w = w_try;
        b = b_try;
        mu = std::move(mu_try);
        st = st_try;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no progress possible at machine precision

    if (guard_eta) {
      // divergence guard for the log link: an unbounded linear predictor
      // shows up as a huge eta before exp() overflows
      const double eta_max = (Zs * w).array().abs().maxCoeff() + std::abs(b);
      if (eta_max > kEtaDivergence) break;
    }
  }
  return {w, b};
}

struct LbfgsResult {
  Eigen::VectorXd theta;
  bool converged = false;
  int iterations = 0;
};

// Standard two-loop L-BFGS with Armijo backtracking, zero initialization.
template <typename ObjGrad>
LbfgsResult lbfgs(Eigen::Index dim, const FitOptions& opts, ObjGrad obj_grad) {
  constexpr std::size_t kHistory = 10;
  LbfgsResult res;
  res.theta = Eigen::VectorXd::Zero(dim);

  Eigen::VectorXd g(dim);
  double f = obj_grad(res.theta, g);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> hist;  // (s, y)

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= opts.tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd q = g;
    std::vector<double> alpha(hist.size());
    for (std::size_t k = hist.size(); k-- > 0;) {
      const auto& [s, yv] = hist[k];
      alpha[k] = s.dot(q) / yv.dot(s);
      q -= alpha[k] * yv;
    }
    if (!hist.empty()) {
      const auto& [s, yv] = hist.back();
      q *= s.dot(yv) / yv.squaredNorm();
    }
    for (std::size_t k = 0; k < hist.size(); ++k) {
      const auto& [s, yv] = hist[k];
      const double beta = yv.dot(q) / yv.dot(s);
      q += (alpha[k] - beta) * s;
    }
    Eigen::VectorXd step = -q;
    double slope = g.dot(step);
    if (!(slope < 0)) {
      step = -g;
      slope = g.dot(step);
    }

    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd theta_try = res.theta + t * step;
      Eigen::VectorXd g_try(dim);
      const double f_try = obj_grad(theta_try, g_try);
      if (std::isfinite(f_try) && f_try <= f + kArmijoC1 * t * slope) {
        const Eigen::VectorXd s = theta_try - res.theta;
        const Eigen::VectorXd yv = g_try - g;
        if (s.dot(yv) > 1e-10 * s.norm() * yv.norm()) {
          hist.emplace_back(s, yv);
          if (hist.size() > kHistory) hist.pop_front();
        }
        res.theta = theta_try;
        f = f_try;
        g = std::move(g_try);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return res;
}

}  // namespace

Eigen::MatrixXd LinearProbe::weights_original() const {
  Eigen::MatrixXd out = W;
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) /= standardizer.scale(j);
  return out;
}

Eigen::VectorXd LinearProbe::bias_original() const {
  const Eigen::MatrixXd Wo = weights_original();
  return bias - Wo * standardizer.mean;
}

LinearProbe fit_logistic(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const FitOptions& opts,
                         int n_classes) {
  if (Z.rows() < 2) fail("fit_logistic needs n >= 2");
  if (y.size() != Z.rows()) fail("fit_logistic: label count mismatch");
  if (opts.max_iter < 1 || !(opts.tol > 0)) fail("bad FitOptions");

  int max_label = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (std::floor(v) != v || v < 0) fail("class labels must be non-negative integers");
    max_label = std::max(max_label, static_cast<int>(v));
  }
  const int C = std::max(n_classes, max_label + 1);
  if (C < 2) fail("fit_logistic needs at least 2 classes");

  LinearProbe probe;
  probe.link = Link::Logit;
  probe.n_classes = C;
  probe.l2 = opts.l2;
  probe.standardizer = fit_standardizer(Z);
  const Eigen::MatrixXd Zs = apply_standardizer(probe.standardizer, Z);

  if (C == 2) {
    check_binary(y);
    bool conv = false;
    int iters = 0;
    auto obj = [&](const Eigen::VectorXd& w, double b, Eigen::VectorXd* mu) {
      return kernels::logistic_obj_grad(Zs, y, w, b, opts.l2, mu);
    };
    auto [w, b] = newton_glm(Zs, opts, obj, [](double mu) { return mu * (1.0 - mu); }, false, &conv, &iters);
    probe.W = w.transpose();
    probe.bias = Eigen::VectorXd::Constant(1, b);
    probe.converged = conv;
    probe.iterations = iters;
    return probe;
  }

  // multinomial softmax
  std::vector<int> yi(static_cast<std::size_t>(y.size()));
  std::vector<bool> seen(static_cast<std::size_t>(C), false);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    yi[static_cast<std::size_t>(i)] = static_cast<int>(y(i));
    seen[static_cast<std::size_t>(yi[static_cast<std::size_t>(i)])] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) fail("single-class labels: need both classes to fit");

  const Eigen::Index d = Zs.cols();
  auto obj = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(theta.data(), C, d);
    const Eigen::VectorXd b = theta.tail(C);
    const kernels::SoftmaxStats st = kernels::softmax_obj_grad(Zs, yi, W, b, opts.l2);
    grad.resize(theta.size());
    Eigen::Map<Eigen::MatrixXd>(grad.data(), C, d) = st.grad_W;
    grad.tail(C) = st.grad_b;
    return st.value;
  };
  const LbfgsResult res = lbfgs(static_cast<Eigen::Index>(C) * d + C, opts, obj);
  probe.W = Eigen::Map<const Eigen::MatrixXd>(res.theta.data(), C, d);
  probe.bias = res.theta.tail(C);
  probe.converged = res.converged;
  probe.iterations = res.iterations;
  return probe;
}

LinearProbe fit_linear(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double l2) {
  if (Z.rows() < 2) fail("fit_linear needs n >= 2");
  if (y.size() != Z.rows()) fail("fit_linear: label count mismatch");
  if (l2 < 0) fail("l2 must be >= 0");

  LinearProbe probe;
  probe.link = Link::Identity;
  probe.l2 = l2;
  probe.standardizer = fit_standardizer(Z);
  const Eigen::MatrixXd Zs = apply_standardizer(probe.standardizer, Z);

  const double n = static_cast<double>(Zs.rows());
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::RowVectorXd zmean = Zs.colwise().mean();
  Eigen::MatrixXd G = kernels::gram_centered(Zs, zmean);
  const Eigen::VectorXd rhs = kernels::matvec_t(Zs, yc);

  if (l2 == 0.0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    const double emax = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (emax == 0.0 || eig.eigenvalues().minCoeff() < emax * 1e-10)
      fail("ridge system singular at l2=0; pass l2 > 0");
  }
  G.diagonal().array() += n * l2;
  const Eigen::VectorXd w = G.ldlt().solve(rhs);
  if (!w.allFinite()) fail("ridge solve failed; pass a larger l2");

  probe.W = w.transpose();
  probe.bias = Eigen::VectorXd::Constant(1, y_mean - zmean.dot(w));
  probe.converged = true;
  return probe;
}

LinearProbe fit_poisson(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const FitOptions& opts) {
  if (Z.rows() < 2) fail("fit_poisson needs n >= 2");
  if (y.size() != Z.rows()) fail("fit_poisson: label count mismatch");
  if (opts.max_iter < 1 || !(opts.tol > 0)) fail("bad FitOptions");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) < 0 || std::floor(y(i)) != y(i)) fail("count labels must be non-negative integers");

  LinearProbe probe;
  probe.link = Link::Log;
  probe.l2 = opts.l2;
  probe.standardizer = fit_standardizer(Z);
  const Eigen::MatrixXd Zs = apply_standardizer(probe.standardizer, Z);

  bool conv = false;
  int iters = 0;
  auto obj = [&](const Eigen::VectorXd& w, double b, Eigen::VectorXd* mu) {
    return kernels::poisson_obj_grad(Zs, y, w, b, opts.l2, mu);
  };
  auto [w, b] = newton_glm(Zs, opts, obj, [](double mu) { return 2.0 * mu; }, true, &conv, &iters);
  probe.W = w.transpose();
  probe.bias = Eigen::VectorXd::Constant(1, b);
  probe.converged = conv;
  probe.iterations = iters;
  return probe;
}

Eigen::VectorXd predict(const LinearProbe& probe, const Eigen::MatrixXd& Z) {
  if (Z.cols() != probe.W.cols()) fail("predict: dimension mismatch");
  const Eigen::MatrixXd Zs = apply_standardizer(probe.standardizer, Z);
  const Eigen::MatrixXd scores = kernels::linear_scores(Zs, probe.W, probe.bias);

  Eigen::VectorXd out(Z.rows());
  switch (probe.link) {
    case Link::Identity:
      out = scores.col(0);
      break;
    case Link::Log:
      out = scores.col(0).array().exp();
      break;
    case Link::Logit:
      if (scores.cols() == 1) {
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = sigmoid(scores(i, 0));
      } else {
        for (Eigen::Index i = 0; i < out.size(); ++i) {
          Eigen::Index argmax = 0;
          scores.row(i).maxCoeff(&argmax);
          out(i) = static_cast<double>(argmax);
        }
      }
      break;
  }
  return out;
}

Eigen::MatrixXd predict_proba(const LinearProbe& probe, const Eigen::MatrixXd& Z) {
  if (probe.link != Link::Logit) fail("predict_proba requires a classification probe");
  if (Z.cols() != probe.W.cols()) fail("predict_proba: dimension mismatch");
  const Eigen::MatrixXd Zs = apply_standardizer(probe.standardizer, Z);
  const Eigen::MatrixXd scores = kernels::linear_scores(Zs, probe.W, probe.bias);

  if (scores.cols() == 1) {
    Eigen::MatrixXd out(Z.rows(), 2);
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const double p1 = sigmoid(scores(i, 0));
      out(i, 0) = 1.0 - p1;
      out(i, 1) = p1;
    }
    return out;
  }
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n) fail("roc_auc: size mismatch");
  std::int64_t n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels(i) == 1.0) ++n_pos;
    else if (labels(i) == 0.0) ++n_neg;
    else fail("roc_auc labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0) fail("roc_auc needs both classes present");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });

  // average ranks across ties, then the rank-sum statistic
  double rank_pos_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels(order[k]) == 1.0) rank_pos_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_pos_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) fail("r2: size mismatch");
  if (truth.size() < 2) fail("r2 needs n >= 2");
  if (truth.maxCoeff() == truth.minCoeff()) fail("r2 undefined for constant truth");
  const double mean = truth.mean();
  const double ss_res = (truth - pred).squaredNorm();
  const double ss_tot = (truth.array() - mean).square().sum();
  return 1.0 - ss_res / ss_tot;
}

namespace {

double accuracy(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  double hits = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    if (pred(i) == truth(i)) hits += 1;
  return hits / static_cast<double>(truth.size());
}

}  // namespace

std::vector<ReportRow> run_linear_probing(const EmbeddingTable& emb, const LabelTable& labels,
                                          const std::vector<std::string>& properties, const SplitSpec& split,
                                          const ProbeRunOptions& opts) {
  std::vector<std::string> props = properties;
  if (props.empty())
    for (const auto& c : labels.columns) props.push_back(c.name);

  std::vector<ReportRow> rows;
  for (const auto& prop : props) {
    ReportRow row;
    row.property = prop;
    row.value = std::numeric_limits<double>::quiet_NaN();
    if (const LabelColumn* col = labels.find(prop))
      row.metric = col->kind.is_classy() ? (col->kind.kind == Kind::Binary ? "auc" : "accuracy") : "r2";
    try {
      const JoinResult joined = join(emb, labels, prop);
      const ProbingDataset& ds = joined.ds;
      if (ds.n() < 2) {
        row.reason = "n<2 after join";
        rows.push_back(row);
        continue;
      }

      const Split sp = (ds.kind.is_classy() && split.stratify)
                           ? split_stratified(ds.p, split.test_frac, split.seed)
                           : split_random(ds.n(), split.test_frac, split.seed);
      const ProbingDataset train = take_rows(ds, sp.train_idx);
      const ProbingDataset test = take_rows(ds, sp.test_idx);
      row.n_train = train.n();
      row.n_test = test.n();

      LinearProbe probe;
      switch (ds.kind.kind) {
        case Kind::Binary:
          probe = fit_logistic(train.Z, train.p, opts.glm, 2);
          row.value = roc_auc(predict(probe, test.Z), test.p);
          break;
        case Kind::Categorical:
          probe = fit_logistic(train.Z, train.p, opts.glm, ds.kind.n_classes);
          row.value = accuracy(predict(probe, test.Z), test.p);
          break;
        case Kind::Count:
          probe = fit_poisson(train.Z, train.p, opts.glm);
          row.value = r2(predict(probe, test.Z), test.p);
          break;
        case Kind::Continuous:
          probe = fit_linear(train.Z, train.p, opts.ridge_l2);
          row.value = r2(predict(probe, test.Z), test.p);
          break;
      }
      row.converged = probe.converged;
      if (!probe.converged) row.reason = "did not converge";
    } catch (const Error& e) {
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.converged = false;
      row.reason = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "property,metric,value,n_train,n_test,converged,reason\n";
  for (const auto& r : rows) {
    out << csv::escape(r.property) << "," << r.metric << ","
        << (std::isnan(r.value) ? std::string("NA") : csv::fmt_double(r.value)) << "," << r.n_train << ","
        << r.n_test << "," << (r.converged ? "true" : "false") << "," << csv::escape(r.reason) << "\n";
  }
}

std::string report_json(const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"property", r.property}, {"metric", r.metric},   {"n_train", r.n_train},
                     {"n_test", r.n_test},     {"converged", r.converged}, {"reason", r.reason}};
    if (std::isnan(r.value)) j["value"] = nullptr;
    else j["value"] = r.value;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace probekit
