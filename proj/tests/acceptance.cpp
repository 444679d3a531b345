// Acceptance suite. Prints one pass/fail line per criterion and exits
// nonzero when any of them fails.
//
// Usage: acceptance --cli <path-to-probekit-binary> --data <test-data-dir>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "probekit/bmi.hpp"
#include "probekit/chemprops.hpp"
#include "probekit/core.hpp"
#include "probekit/csv.hpp"
#include "probekit/kernels.hpp"
#include "probekit/pairwise.hpp"
#include "probekit/probes.hpp"
#include "probekit/rng.hpp"
#include "probekit/smiles.hpp"
#include "probekit/synth.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

std::string g_cli, g_data;

struct Outcome {
  bool ok = true;
  std::string detail;
};

Outcome fail(const std::string& why) { return {false, why}; }

int heavy_atoms(const Molecule& m) {
  int n = 0;
  for (const Atom& a : m.atoms)
    if (a.element != "H") ++n;
  return n;
}

std::string num(double x) {
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

Eigen::MatrixXd take(const Eigen::MatrixXd& Z, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), Z.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// ---------------------------------------------------------------------------
// 1. roc_auc equals O(n^2) brute-force pair counting, ties included

Outcome c1_metric_oracle() {
  Rng rng(101);
  for (int inst = 0; inst < 200; ++inst) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(199));
    Eigen::VectorXd y(n), s(n);
    y(0) = 0.0;
    y(1) = 1.0;
    for (Eigen::Index i = 2; i < n; ++i) y(i) = static_cast<double>(rng.below(2));
    const bool ties = inst % 2 == 0;
    for (Eigen::Index i = 0; i < n; ++i) s(i) = ties ? static_cast<double>(rng.below(5)) : rng.gauss();

    double wins = 0;
    long long n_pos = 0, n_neg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y(i) != 1.0) continue;
      ++n_pos;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (y(j) != 0.0) continue;
        if (s(i) > s(j)) wins += 1.0;
        else if (s(i) == s(j)) wins += 0.5;
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) n_neg += y(j) == 0.0 ? 1 : 0;
    const double brute = wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    const double lib = roc_auc(s, y);
    if (lib != brute)
      return fail("instance " + std::to_string(inst) + ": roc_auc " + num(lib) + " != brute " + num(brute));
  }
  return {};
}

// ---------------------------------------------------------------------------
// 2. logistic and Poisson gradients match central finite differences

Outcome c2_gradient_checks() {
  Rng rng(7);
  const double tol = 1e-5;
  for (int inst = 0; inst < 50; ++inst) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(19));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.gauss();
    Eigen::VectorXd w(d);
    for (Eigen::Index j = 0; j < d; ++j) w(j) = 0.5 * rng.gauss();
    const double b = 0.3 * rng.gauss();
    const double l2 = 0.5 * rng.unit();
    Eigen::VectorXd y_bin(n), y_cnt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y_bin(i) = static_cast<double>(rng.below(2));
      y_cnt(i) = static_cast<double>(rng.poisson(2.0));
    }

    struct Case {
      const char* name;
      std::function<kernels::GlmStats(const Eigen::VectorXd&, double)> eval;
      const Eigen::VectorXd* y;
    };
    const std::vector<Case> cases = {
        {"logistic",
         [&](const Eigen::VectorXd& ww, double bb) { return kernels::logistic_obj_grad(X, y_bin, ww, bb, l2); },
         &y_bin},
        {"poisson",
         [&](const Eigen::VectorXd& ww, double bb) { return kernels::poisson_obj_grad(X, y_cnt, ww, bb, l2); },
         &y_cnt},
    };
    for (const auto& c : cases) {
      const kernels::GlmStats g = c.eval(w, b);
      auto check = [&](double analytic, double fd, const std::string& where) -> std::optional<std::string> {
        const double rel = std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        if (rel > tol)
          return std::string(c.name) + " " + where + ": grad " + num(analytic) + " vs fd " + num(fd) +
                 " (rel " + num(rel) + ")";
        return std::nullopt;
      };
      for (Eigen::Index j = 0; j < d; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(w(j)));
        Eigen::VectorXd wp = w, wm = w;
        wp(j) += h;
        wm(j) -= h;
        const double fd = (c.eval(wp, b).value - c.eval(wm, b).value) / (2.0 * h);
        if (auto err = check(g.grad_w(j), fd, "w" + std::to_string(j)))
          return fail("instance " + std::to_string(inst) + " " + *err);
      }
      const double hb = 1e-5 * std::max(1.0, std::abs(b));
      const double fdb = (c.eval(w, b + hb).value - c.eval(w, b - hb).value) / (2.0 * hb);
      if (auto err = check(g.grad_b, fdb, "bias")) return fail("instance " + std::to_string(inst) + " " + *err);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 3. probe recovery on linear_binary; chance-level on independent

double held_out_auc(Mechanism mech, double sigma, std::uint64_t seed) {
  SynthSpec spec;
  spec.n = 5000;
  spec.d = 16;
  spec.mechanism = mech;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  const auto data = std::get<SynthData>(gen(spec));
  const Eigen::VectorXd& y = data.labels.columns[0].values;
  const Split s = split_stratified(y, 0.2, 1);
  const LinearProbe probe = fit_logistic(take(data.emb.Z, s.train_idx), take(y, s.train_idx), FitOptions{}, 2);
  const Eigen::VectorXd scores = predict_proba(probe, take(data.emb.Z, s.test_idx)).col(1);
  return roc_auc(scores, take(y, s.test_idx));
}

Outcome c3_probe_recovery() {
  const double auc_sig = held_out_auc(Mechanism::LinearBinary, 0.1, 42);
  if (auc_sig < 0.99) return fail("linear_binary auc " + num(auc_sig) + " < 0.99");
  const double auc_ind = held_out_auc(Mechanism::Independent, 0.0, 43);
  if (auc_ind < 0.45 || auc_ind > 0.55)
    return fail("independent auc " + num(auc_ind) + " outside [0.45, 0.55]");
  return {.ok = true, .detail = "auc " + num(auc_sig) + " / " + num(auc_ind)};
}

// ---------------------------------------------------------------------------
// 4. Poisson probe recovers the population-optimal signal weight
//
// The generator draws p ~ Poisson(3) and sets z = ln(p+1) u + noise, so the
// best log-linear predictor along u solves max_{a,b} E[p (a t + b) - e^{a t + b}]
// with t = ln(p+1). That population optimum is computed here by Newton on the
// exact Poisson(3) pmf and used as the truth for the recovered weight.

std::pair<double, double> poisson_population_optimum() {
  const int kMax = 80;
  std::vector<double> pi(kMax + 1), t(kMax + 1);
  double logpmf = -3.0;  // ln pmf(0)
  for (int k = 0; k <= kMax; ++k) {
    pi[static_cast<std::size_t>(k)] = std::exp(logpmf);
    logpmf += std::log(3.0) - std::log(static_cast<double>(k + 1));
    t[static_cast<std::size_t>(k)] = std::log(static_cast<double>(k) + 1.0);
  }
  double a = 1.0, b = 0.0;
  for (int it = 0; it < 100; ++it) {
    double f1 = 0, f2 = 0, j11 = 0, j12 = 0, j22 = 0;
    for (int k = 0; k <= kMax; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const double mu = std::exp(a * t[ku] + b);
      f1 += pi[ku] * t[ku] * (k - mu);
      f2 += pi[ku] * (k - mu);
      j11 -= pi[ku] * t[ku] * t[ku] * mu;
      j12 -= pi[ku] * t[ku] * mu;
      j22 -= pi[ku] * mu;
    }
    const double det = j11 * j22 - j12 * j12;
    const double da = (j22 * f1 - j12 * f2) / det;
    const double db = (j11 * f2 - j12 * f1) / det;
    a -= da;
    b -= db;
    if (std::abs(da) + std::abs(db) < 1e-14) break;
  }
  return {a, b};
}

Outcome c4_poisson_probe() {
  SynthSpec spec;
  spec.n = 10000;
  spec.d = 16;
  spec.mechanism = Mechanism::LinearCount;
  spec.noise_sigma = 0.01;
  spec.seed = 4;
  const auto data = std::get<SynthData>(gen(spec));
  const Eigen::VectorXd& y = data.labels.columns[0].values;
  const Split s = split_random(data.emb.ids.size(), 0.2, 1);
  FitOptions opts;
  opts.l2 = 1e-6;
  const LinearProbe probe = fit_poisson(take(data.emb.Z, s.train_idx), take(y, s.train_idx), opts);
  if (!probe.converged) return fail("poisson fit did not converge");

  const auto [a_star, b_star] = poisson_population_optimum();
  const double a_hat = (probe.weights_original() * data.signal_dir)(0);
  if (std::abs(a_hat - a_star) > 0.05)
    return fail("recovered weight " + num(a_hat) + " vs truth " + num(a_star) + " (diff " +
                num(std::abs(a_hat - a_star)) + " > 0.05)");

  const Eigen::VectorXd mu = predict(probe, take(data.emb.Z, s.test_idx));
  const double score = r2(mu, take(y, s.test_idx));
  if (score < 0.9) return fail("count r2 " + num(score) + " < 0.9");
  return {.ok = true, .detail = "weight " + num(a_hat) + " vs " + num(a_star) + ", r2 " + num(score)};
}

// ---------------------------------------------------------------------------
// 5. BMI analytic limits and curve shape

ProbingDataset synth_dataset(Mechanism mech, std::size_t n, Eigen::Index d, std::uint64_t seed) {
  SynthSpec spec;
  spec.n = n;
  spec.d = d;
  spec.mechanism = mech;
  spec.seed = seed;
  const auto data = std::get<SynthData>(gen(spec));
  ProbingDataset ds;
  ds.Z = data.emb.Z;
  ds.p = data.labels.columns[0].values;
  ds.kind = data.labels.columns[0].kind;
  ds.ids = data.emb.ids;
  return ds;
}

Outcome c5_bmi_limits() {
  const double ln2 = std::log(2.0);
  const Eigen::Vector2d alpha(1.0, 1.0);

  const ProbingDataset det = synth_dataset(Mechanism::OneHot, 13000, 2, 9);
  const BmiCurve curve = bmi_curve(det, {100, 1000, 10000}, split_stratified(det.p, 0.2, 3), alpha, 1e-3, 5);
  if (curve.points.size() != 3)
    return fail("deterministic curve has " + std::to_string(curve.points.size()) + " points, expected 3");
  for (const auto& p : curve.points)
    if (p.bmi > p.h_p + 1e-9)
      return fail("bmi " + num(p.bmi) + " exceeds H(P) " + num(p.h_p) + " at n=" + std::to_string(p.n_train));
  const BmiPoint& top = curve.points[2];
  if (std::abs(top.bmi - ln2) > 0.05)
    return fail("deterministic bmi at 10000 is " + num(top.bmi) + ", not within 0.05 of ln2");
  if (!(top.bmi > curve.points[0].bmi))
    return fail("curve does not increase: bmi(100)=" + num(curve.points[0].bmi) +
                " vs bmi(10000)=" + num(top.bmi));

  const ProbingDataset ind = synth_dataset(Mechanism::Independent, 13000, 16, 10);
  const BmiCurve icurve = bmi_curve(ind, {10000}, split_stratified(ind.p, 0.2, 3), alpha, 1e-3, 5);
  if (icurve.points.size() != 1) return fail("independent curve missing its point");
  const BmiPoint& ip = icurve.points[0];
  if (ip.bmi > ip.h_p + 1e-9) return fail("independent bmi exceeds H(P)");
  if (std::abs(ip.bmi) > 0.05) return fail("independent |bmi| " + num(std::abs(ip.bmi)) + " > 0.05");
  return {.ok = true, .detail = "bmi(10000) " + num(top.bmi) + ", independent " + num(ip.bmi)};
}

// ---------------------------------------------------------------------------
// 6. entropy_dirichlet limits against an independent digamma

double psi_int(int n) {
  // psi(n) = -gamma + sum_{k<n} 1/k for integer n >= 1
  const double gamma = 0.57721566490153286060651209008240243;
  double h = 0;
  for (int k = 1; k < n; ++k) h += 1.0 / k;
  return -gamma + h;
}

Outcome c6_entropy_limits() {
  const Eigen::Vector2d alpha(1.0, 1.0);
  const double big = entropy_dirichlet(Eigen::Vector2d(1e5, 1e5), alpha);
  if (std::abs(big - std::log(2.0)) > 1e-3)
    return fail("counts [1e5,1e5] entropy " + num(big) + " not within 1e-3 of ln2");
  const double onesided = entropy_dirichlet(Eigen::Vector2d(1e5, 0.0), alpha);
  if (std::abs(onesided) > 1e-2) return fail("counts [1e5,0] entropy " + num(onesided) + " not within 1e-2 of 0");
  const double small = entropy_dirichlet(Eigen::Vector2d(1.0, 0.0), alpha);
  const double expected = psi_int(4) - (2.0 / 3.0) * psi_int(3) - (1.0 / 3.0) * psi_int(2);
  if (std::abs(small - expected) > 1e-10)
    return fail("counts [1,0] entropy " + num(small) + " vs digamma formula " + num(expected));
  return {.ok = true, .detail = "[1,0] case = " + num(small)};
}

// ---------------------------------------------------------------------------
// 7. pairwise geometry on synth paired

Outcome c7_pairwise_geometry() {
  SynthSpec spec;
  spec.n = 1000;
  spec.d = 32;
  spec.mechanism = Mechanism::Paired;
  spec.noise_sigma = 0.01;
  spec.seed = 12;
  const auto sp = std::get<SynthPairs>(gen(spec));
  PairwiseOptions opts;
  opts.seed = 1;
  const PairwiseReport rep = analyze_pairs(sp.pairs, opts);
  if (rep.cosine.mean < 0.99) return fail("mean pairwise cosine " + num(rep.cosine.mean) + " < 0.99");
  if (rep.pca.explained_variance_ratio(0) < 0.5)
    return fail("first PC ratio " + num(rep.pca.explained_variance_ratio(0)) + " < 0.5");
  if (rep.c_ate_pair < 0.99) return fail("c_ate_pair " + num(rep.c_ate_pair) + " < 0.99");
  if (rep.probe.auc < 0.99) return fail("pair probe auc " + num(rep.probe.auc) + " < 0.99");
  return {.ok = true,
          .detail = "cosine " + num(rep.cosine.mean) + ", pc1 " + num(rep.pca.explained_variance_ratio(0)) +
                    ", auc " + num(rep.probe.auc)};
}

// ---------------------------------------------------------------------------
// 8. algebraic identities

Outcome c8_identities() {
  Rng rng(21);
  const Eigen::Index n = 50, d = 7;
  PairEmbeddings pe;
  pe.group = "g";
  pe.Z.resize(n, d);
  pe.Zp.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      pe.Z(i, j) = rng.gauss();
      pe.Zp(i, j) = rng.gauss();
    }

  const Eigen::MatrixXd V = diff_vectors(pe);
  const AteResult ar = ate(pe);
  const Eigen::VectorXd col_mean = V.colwise().mean().transpose();
  if ((ar.v_ate - col_mean).cwiseAbs().maxCoeff() > 1e-12)
    return fail("v_ate deviates from the diff-vector column mean by " +
                num((ar.v_ate - col_mean).cwiseAbs().maxCoeff()));

  const Eigen::MatrixXd C = center_pairs(pe);
  if (!((C.topRows(n) + C.bottomRows(n)).array() == 0.0).all())
    return fail("center_pairs antisymmetry is not exact");

  const PcaResult pc = pca(C, static_cast<int>(d));
  const Eigen::MatrixXd gram = pc.components * pc.components.transpose();
  const double ortho = (gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (ortho > 1e-8) return fail("PCA components deviate from orthonormality by " + num(ortho));
  const double ratio_gap = std::abs(pc.explained_variance_ratio.sum() - 1.0);
  if (ratio_gap > 1e-9) return fail("explained variance ratios sum to 1 off by " + num(ratio_gap));
  return {};
}

// ---------------------------------------------------------------------------
// 9. chemistry pipeline on the frozen corpus and truth table

Outcome c9_chemistry() {
  const auto records = read_smiles_file(g_data + "/corpus.smi");
  if (records.size() != 50) return fail("corpus has " + std::to_string(records.size()) + " records, expected 50");
  for (const auto& rec : records) {
    const Molecule m = parse_smiles(rec.smiles);
    const Molecule back = parse_smiles(write_smiles(m));
    if (!graphs_isomorphic(m, back)) return fail("round trip broke isomorphism for '" + rec.id + "'");
  }

  const GroupLibrary& lib = default_group_library();
  std::ifstream in(g_data + "/truth_molecules.csv");
  if (!in) return fail("cannot open truth_molecules.csv");
  csv::Reader rd(in);
  std::vector<std::string> header, row;
  if (!rd.next(header)) return fail("truth table is empty");
  std::size_t n_rows = 0;
  while (rd.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    ++n_rows;
    const Molecule m = parse_smiles(row[1]);
    for (std::size_t c = 2; c < header.size(); ++c) {
      const long long expected = std::stoll(row[c]);
      const std::string& name = header[c];
      if (name.starts_with("count_")) {
        const long long got = count_atoms(m, name.substr(6));
        if (got != expected)
          return fail(row[0] + ": " + name + " = " + std::to_string(got) + ", expected " +
                      std::to_string(expected));
      } else {
        const bool got = detect_group(m, name, lib);
        if (got != (expected == 1))
          return fail(row[0] + ": " + name + " = " + (got ? "1" : "0") + ", expected " + row[c]);
      }
    }
  }
  if (n_rows != 20) return fail("truth table has " + std::to_string(n_rows) + " rows, expected 20");

  const auto pairs = gen_pairs(g_data + "/nitro10.smi", "nitro", std::nullopt, 0, lib);
  if (pairs.size() != 10) return fail("gen_pairs returned " + std::to_string(pairs.size()) + " pairs");
  for (const auto& p : pairs) {
    if (detect_group(p.target, "nitro", lib)) return fail("target of '" + p.source_id + "' still has a nitro");
    if (heavy_atoms(p.source) - heavy_atoms(p.target) != 3)
      return fail("pair '" + p.source_id + "' does not drop exactly 3 heavy atoms");
  }
  return {};
}

// ---------------------------------------------------------------------------
// 10. CLI determinism: every command twice, byte-identical outputs

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  q += "'";
  return q;
}

int run_cli(const std::vector<std::string>& args) {
  std::string cmd = shell_quote(g_cli);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  if (raw == -1 || !WIFEXITED(raw)) return -1;
  return WEXITSTATUS(raw);
}

Outcome c10_cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "probekit_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto at = [&](const std::string& name) { return (dir / name).string(); };

  struct Command {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> outputs;
  };
  const std::vector<Command> commands = {
      {"synth",
       {"synth", "--mechanism", "linear_binary", "--n", "200", "--d", "6", "--sigma", "0.1", "--seed", "3",
        "--out", at("syn"), "--no-timestamp"},
       {at("syn.emb.csv"), at("syn.labels.csv"), at("syn.labels.schema.json"), at("syn.meta.json")}},
      {"synth (paired)",
       {"synth", "--mechanism", "paired", "--n", "80", "--d", "6", "--sigma", "0.05", "--seed", "4", "--out",
        at("pw"), "--no-timestamp"},
       {at("pw.source.emb.csv"), at("pw.target.emb.csv"), at("pw.pairs.csv"), at("pw.meta.json")}},
      {"gen-labels",
       {"gen-labels", "--smiles", g_data + "/nitro10.smi", "--props", "count_N,nitro", "--out", at("gl.csv")},
       {at("gl.csv"), at("gl.schema.json"), at("gl.errors.csv")}},
      {"gen-pairs",
       {"gen-pairs", "--smiles", g_data + "/nitro10.smi", "--group", "nitro", "--limit", "5", "--seed", "3",
        "--out", at("gp")},
       {at("gp.csv"), at("gp.source.smi"), at("gp.target.smi")}},
      {"probe",
       {"probe", "--emb", at("syn.emb.csv"), "--labels", at("syn.labels.csv"), "--props", "label", "--seed",
        "2", "--out", at("rep.csv")},
       {at("rep.csv")}},
      {"bmi",
       {"bmi", "--emb", at("syn.emb.csv"), "--labels", at("syn.labels.csv"), "--prop", "label", "--sizes",
        "40,120", "--l2", "0.001", "--seed", "5", "--out", at("curve.json"), "--no-timestamp"},
       {at("curve.json")}},
      {"pairwise",
       {"pairwise", "--src-emb", at("pw.source.emb.csv"), "--tgt-emb", at("pw.target.emb.csv"), "--pairs",
        at("pw.pairs.csv"), "--seed", "1", "--out", at("po"), "--no-timestamp"},
       {at("po.report.json"), at("po.pca.csv"), at("po.cosine.csv")}},
      {"report", {"report", "--in", at("rep.csv"), "--out", at("agg.csv")}, {at("agg.csv")}},
  };

  for (const auto& cmd : commands) {
    if (run_cli(cmd.args) != 0) return fail(cmd.name + ": first run failed");
    std::map<std::string, std::string> first;
    for (const auto& f : cmd.outputs) {
      if (!fs::exists(f)) return fail(cmd.name + ": missing output " + f);
      first[f] = slurp(f);
    }
    if (run_cli(cmd.args) != 0) return fail(cmd.name + ": second run failed");
    for (const auto& f : cmd.outputs)
      if (slurp(f) != first[f]) return fail(cmd.name + ": " + fs::path(f).filename().string() + " changed between runs");
  }
  return {};
}

// ---------------------------------------------------------------------------
// 11. oversmoothing fixtures

Outcome c11_oversmoothing() {
  Eigen::MatrixXd same(4, 3);
  same.rowwise() = Eigen::RowVector3d(0.5, -1.0, 2.0);
  const double collapsed = oversmoothing_metric({same}).value;
  if (collapsed != 0.0) return fail("identical features give " + num(collapsed) + ", expected exactly 0");

  Eigen::MatrixXd two(2, 2);
  two << 0.0, 0.0, 0.0, 3.0;
  const double spread = oversmoothing_metric({two}).value;
  if (spread != 3.0) return fail("two nodes at distance 3 give " + num(spread) + ", expected exactly 3");
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli") g_cli = argv[++i];
    else if (a == "--data") g_data = argv[++i];
  }
  if (g_cli.empty() || g_data.empty() || !fs::exists(g_cli) || !fs::is_directory(g_data)) {
    std::cerr << "usage: acceptance --cli <path-to-probekit-binary> --data <test-data-dir>\n";
    return 2;
  }

  struct Criterion {
    std::string title;
    double time_limit_s;  // 0 = no limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"roc_auc equals brute-force pair counting on 200 instances", 5, c1_metric_oracle},
      {"objective gradients match central finite differences", 5, c2_gradient_checks},
      {"probe recovers linear_binary and stays at chance on independent", 10, c3_probe_recovery},
      {"Poisson probe recovers the population signal weight and count r2", 20, c4_poisson_probe},
      {"BMI hits ln2 on one-hot labels, vanishes on independent, respects H(P)", 60, c5_bmi_limits},
      {"entropy_dirichlet matches analytic and digamma limits", 0, c6_entropy_limits},
      {"paired geometry: cosine, first PC, c_ate_pair and pair probe", 10, c7_pairwise_geometry},
      {"v_ate, center_pairs and PCA algebraic identities", 0, c8_identities},
      {"SMILES round trip, 20-molecule truth table and nitro pair generation", 5, c9_chemistry},
      {"every CLI command is byte-deterministic with --no-timestamp", 0, c10_cli_determinism},
      {"oversmoothing metric matches hand-computed fixtures", 0, c11_oversmoothing},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.ok && c.time_limit_s > 0 && secs > c.time_limit_s)
      out = {false, "took " + num(secs) + "s, limit " + num(c.time_limit_s) + "s"};
    std::ostringstream line;
    line << (out.ok ? "PASS" : "FAIL") << "  " << (i + 1 < 10 ? " " : "") << (i + 1) << "/11  " << c.title;
    if (!out.detail.empty()) line << "  [" << out.detail << "]";
    line << "  (" << std::fixed << std::setprecision(2) << secs << "s)";
    std::cout << line.str() << "\n";
    if (!out.ok) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " of 11 criteria failed\n";
    return 1;
  }
  std::cout << "all 11 criteria passed\n";
  return 0;
}
