#include "probekit/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "probekit/error.hpp"
#include "probekit/kernels.hpp"
#include "probekit/rng.hpp"

namespace probekit {

Eigen::MatrixXd diff_vectors(const PairEmbeddings& pe) {
  if (pe.Z.rows() != pe.Zp.rows() || pe.Z.cols() != pe.Zp.cols()) fail("diff_vectors: shape mismatch");
  if (pe.Z.rows() < 1) fail("diff_vectors: empty pair set");
  return pe.Z - pe.Zp;
}

CosineSummary pairwise_cosine_stats(const Eigen::MatrixXd& V, std::optional<std::size_t> max_pairs,
                                    std::uint64_t seed) {
  const Eigen::VectorXd norms = kernels::row_norms(V);
  std::vector<std::int64_t> keep;
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (norms(i) > 0) keep.push_back(i);

  CosineSummary out;
  out.zero_rows_excluded = V.rows() - static_cast<Eigen::Index>(keep.size());
  if (keep.size() < 2) fail("pairwise_cosine_stats needs at least 2 nonzero rows");

  const std::size_t k = keep.size();
  const std::size_t total = k * (k - 1) / 2;
  kernels::PairList pairs;
  if (max_pairs && total > *max_pairs) {
    out.sampled = true;
    pairs.reserve(*max_pairs);
    Rng rng(seed);
    for (std::size_t t = 0; t < *max_pairs; ++t) {
      const auto a = static_cast<std::size_t>(rng.below(k));
      auto b = static_cast<std::size_t>(rng.below(k - 1));
      if (b >= a) ++b;
      pairs.emplace_back(keep[a], keep[b]);
    }
  } else {
    pairs.reserve(total);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(keep[i], keep[j]);
  }

  const kernels::CosineStats st = kernels::cosine_pairs(V, norms, pairs);
  out.mean = st.sum / static_cast<double>(st.count);
  out.hist = st.hist;
  out.pairs_used = st.count;
  return out;
}

Eigen::MatrixXd center_pairs(const PairEmbeddings& pe) {
  if (pe.Z.rows() != pe.Zp.rows() || pe.Z.cols() != pe.Zp.cols()) fail("center_pairs: shape mismatch");
  const Eigen::Index N = pe.Z.rows();
  Eigen::MatrixXd out(2 * N, pe.Z.cols());
  out.topRows(N) = (pe.Z - pe.Zp) / 2.0;
  out.bottomRows(N) = -out.topRows(N);
  return out;
}

PcaResult pca(const Eigen::MatrixXd& X, int k) {
  const Eigen::Index m = X.rows(), d = X.cols();
  if (m < 2) fail("pca needs m >= 2");
  if (k < 1 || k > std::min(m, d)) fail("pca: k out of range");

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd cov = kernels::gram_centered(X, mean) / static_cast<double>(m);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail("pca: eigendecomposition failed");
  const Eigen::VectorXd evals = eig.eigenvalues();  // ascending
  const double trace = std::max(evals.sum(), 0.0);

  PcaResult res;
  res.components.resize(k, d);
  res.explained_variance_ratio.resize(k);
  for (int c = 0; c < k; ++c) {
    const Eigen::Index src = d - 1 - c;  // descending eigenvalue order
    Eigen::RowVectorXd comp = eig.eigenvectors().col(src).transpose();
    // sign convention: the largest-magnitude coordinate is positive
    Eigen::Index imax = 0;
    comp.cwiseAbs().maxCoeff(&imax);
    if (comp(imax) < 0) comp = -comp;
    res.components.row(c) = comp;
    res.explained_variance_ratio(c) = trace > 0 ? std::max(evals(src), 0.0) / trace : 0.0;
  }

  // (X - mean) C^T without materializing the centered copy
  res.projections = kernels::linear_scores(X, res.components, Eigen::VectorXd::Zero(k));
  res.projections.rowwise() -= (mean * res.components.transpose());
  return res;
}

AteResult ate(const PairEmbeddings& pe) {
  const Eigen::MatrixXd V = diff_vectors(pe);
  AteResult res;
  res.v_ate = V.colwise().mean();

  const double ate_norm = res.v_ate.norm();
  if (ate_norm == 0.0) {
    res.c_ate_pair = std::numeric_limits<double>::quiet_NaN();
    return res;
  }

  const Eigen::VectorXd norms = kernels::row_norms(V);
  const Eigen::MatrixXd dots = kernels::linear_scores(V, res.v_ate.transpose(), Eigen::VectorXd::Zero(1));
  double sum = 0;
  std::int64_t used = 0;
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    if (norms(i) == 0.0) {
      ++res.skipped_rows;
      continue;
    }
    sum += std::clamp(dots(i, 0) / (norms(i) * ate_norm), -1.0, 1.0);
    ++used;
  }
  res.c_ate_pair = used > 0 ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
  return res;
}

PairProbeResult pairwise_linear_probe(const PairEmbeddings& pe, const SplitSpec& split, const FitOptions& opts) {
  const Eigen::Index N = pe.Z.rows();
  if (N < 2) fail("pairwise_linear_probe needs at least 2 pairs");
  if (pe.Zp.rows() != N || pe.Zp.cols() != pe.Z.cols()) fail("pairwise_linear_probe: shape mismatch");

  const Split sp = split_random(static_cast<std::size_t>(N), split.test_frac, split.seed);

  auto stack = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd Z(2 * rows.size(), pe.Z.cols());
    Eigen::VectorXd y(2 * rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Z.row(static_cast<Eigen::Index>(i)) = pe.Z.row(static_cast<Eigen::Index>(rows[i]));
      y(static_cast<Eigen::Index>(i)) = 1.0;
      Z.row(static_cast<Eigen::Index>(rows.size() + i)) = pe.Zp.row(static_cast<Eigen::Index>(rows[i]));
      y(static_cast<Eigen::Index>(rows.size() + i)) = 0.0;
    }
    return std::make_pair(std::move(Z), std::move(y));
  };

  const auto [Ztr, ytr] = stack(sp.train_idx);
  const auto [Zte, yte] = stack(sp.test_idx);

  const LinearProbe probe = fit_logistic(Ztr, ytr, opts, 2);
  PairProbeResult res;
  res.auc = roc_auc(predict(probe, Zte), yte);
  res.n_train_pairs = sp.train_idx.size();
  res.n_test_pairs = sp.test_idx.size();
  res.converged = probe.converged;
  return res;
}

CausalMatrix causal_effect_matrix(const std::vector<std::pair<std::string, LinearProbe>>& probes,
                                  const std::map<std::string, PairEmbeddings>& pairs_by_group) {
  if (probes.empty()) fail("causal_effect_matrix: no probes given");
  for (const auto& [name, probe] : probes)
    if (probe.link != Link::Logit || probe.W.rows() != 1)
      fail("causal_effect_matrix: probe '" + name + "' is not a binary classification probe");

  CausalMatrix out;
  for (const auto& [name, probe] : probes) out.properties.push_back(name);

  std::vector<const PairEmbeddings*> rows;
  for (const auto& [group, pe] : pairs_by_group) {
    if (pe.n() == 0) {
      out.omitted.emplace_back(group, "no pairs");
      continue;
    }
    if (pe.Z.cols() != probes.front().second.W.cols()) {
      out.omitted.emplace_back(group, "dimension mismatch with probes");
      continue;
    }
    out.groups.push_back(group);
    rows.push_back(&pe);
  }
  if (rows.empty()) fail("causal_effect_matrix: no usable groups");

  out.raw.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(probes.size()));
  for (std::size_t g = 0; g < rows.size(); ++g) {
    for (std::size_t y = 0; y < probes.size(); ++y) {
      const auto& probe = probes[y].second;
      const Eigen::MatrixXd qs = predict_proba(probe, rows[g]->Z);
      const Eigen::MatrixXd qt = predict_proba(probe, rows[g]->Zp);
      out.raw(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(y)) =
          (qs.col(1) - qt.col(1)).mean();
    }
  }
  out.centered = out.raw.rowwise() - out.raw.colwise().mean();
  return out;
}

Oversmoothing oversmoothing_metric(const std::vector<Eigen::MatrixXd>& node_embeddings) {
  Oversmoothing out;
  double sum = 0;
  std::size_t used = 0;
  for (const auto& X : node_embeddings) {
    if (X.rows() < 2) {
      ++out.skipped;
      continue;
    }
    const kernels::PairDist pd = kernels::mean_pairwise_distance(X);
    sum += pd.sum / static_cast<double>(pd.count);
    ++used;
  }
  if (used == 0) fail("oversmoothing_metric: no graph has 2 or more nodes");
  out.value = sum / static_cast<double>(used);
  return out;
}

double correlation(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
  if (xs.size() != ys.size()) fail("correlation: size mismatch");
  if (xs.size() < 3) fail("correlation needs at least 3 points");
  const Eigen::ArrayXd xc = xs.array() - xs.mean();
  const Eigen::ArrayXd yc = ys.array() - ys.mean();
  const double ssx = (xc * xc).sum(), ssy = (yc * yc).sum();
  if (ssx == 0.0 || ssy == 0.0) fail("correlation undefined for constant input");
  return std::clamp((xc * yc).sum() / std::sqrt(ssx * ssy), -1.0, 1.0);
}

PairwiseReport analyze_pairs(const PairEmbeddings& pe, const PairwiseOptions& opts) {
  PairwiseReport rep;
  rep.group = pe.group;
  rep.n_pairs = pe.n();

  const Eigen::MatrixXd V = diff_vectors(pe);
  rep.cosine = pairwise_cosine_stats(V, opts.max_pairs, opts.seed);

  const AteResult a = ate(pe);
  rep.v_ate = a.v_ate;
  rep.c_ate_pair = a.c_ate_pair;
  rep.ate_skipped = a.skipped_rows;

  const Eigen::MatrixXd centered = center_pairs(pe);
  const int k = std::max(1, std::min<int>(opts.pca_k, static_cast<int>(std::min(centered.rows(), centered.cols()))));
  rep.pca = pca(centered, k);

  SplitSpec split;
  split.test_frac = opts.test_frac;
  split.seed = opts.seed;
  rep.probe = pairwise_linear_probe(pe, split, opts.fit);
  return rep;
}

}  // namespace probekit
