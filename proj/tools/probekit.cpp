// probekit: linear, Bayesian and pairwise probing over embedding tables.
//
// Exit codes: 0 success, 1 fatal, 2 partial success (some rows or pairs were
// skipped; details land in sidecar files and on stderr).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

#include "probekit/bmi.hpp"
#include "probekit/chemprops.hpp"
#include "probekit/core.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/pairwise.hpp"
#include "probekit/probes.hpp"
#include "probekit/synth.hpp"

namespace {

using namespace probekit;
using nlohmann::json;

std::string strip_suffix(std::string s, const std::string& suffix) {
  if (s.size() > suffix.size() && s.ends_with(suffix)) s.resize(s.size() - suffix.size());
  return s;
}

std::string schema_path_for(const std::string& csv_path) {
  return strip_suffix(csv_path, ".csv") + ".schema.json";
}

EmbFormat detect_emb_format(const std::string& path) {
  if (path.ends_with(".csv")) return EmbFormat::Csv;
  if (path.ends_with(".f32") || path.ends_with(".bin")) return EmbFormat::F32;
  fail("cannot infer embedding format of '" + path + "' (expected .csv, .f32 or .bin)");
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  return out;
}

void write_json_file(const json& j, const std::string& path) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json nan_to_null(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

const GroupLibrary& pick_library(const std::string& path, GroupLibrary& storage) {
  if (path.empty()) return default_group_library();
  storage = load_group_library(path);
  return storage;
}

// Flat or one-level-nested JSON object; a nested object keyed by a subcommand
// name supplies that subcommand's options, arrays give repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const std::exception& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::FileError("config root must be a JSON object");
    std::vector<CLI::ConfigItem> out;
    walk(j, {}, out);
    return out;
  }

 private:
  static void walk(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, val] : j.items()) {
      if (val.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(val, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (val.is_array()) {
        for (const auto& v : val) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(val));
      }
      out.push_back(std::move(item));
    }
  }

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }
};

// ---------------------------------------------------------------- gen-labels

struct GenLabelsArgs {
  std::string smiles, out, library;
  std::vector<std::string> props;
};

int run_gen_labels(const GenLabelsArgs& a) {
  GroupLibrary storage;
  const GroupLibrary& lib = pick_library(a.library, storage);
  const LabelTableResult res = compute_label_table(a.smiles, a.props, lib);
  save_labels(res.table, a.out, schema_path_for(a.out));

  const std::string err_path = strip_suffix(a.out, ".csv") + ".errors.csv";
  auto err_out = open_out(err_path);
  err_out << "id,error\n";
  for (const auto& [id, msg] : res.errors) err_out << csv::escape(id) << "," << csv::escape(msg) << "\n";

  std::cout << "wrote " << res.table.ids.size() << " rows x " << res.table.columns.size() << " properties to "
            << a.out << "\n";
  if (!res.errors.empty()) {
    std::cerr << res.errors.size() << " rows failed to parse; see " << err_path << "\n";
    return 2;
  }
  return 0;
}

// ----------------------------------------------------------------- gen-pairs

struct GenPairsArgs {
  std::string smiles, group, out, library;
  std::optional<std::uint64_t> limit;
  std::uint64_t seed = 0;
};

int run_gen_pairs(const GenPairsArgs& a) {
  GroupLibrary storage;
  const GroupLibrary& lib = pick_library(a.library, storage);
  std::optional<std::size_t> limit;
  if (a.limit) limit = static_cast<std::size_t>(*a.limit);
  const auto pairs = gen_pairs(a.smiles, a.group, limit, a.seed, lib);
  write_pair_files(pairs, a.out + ".csv");
  std::cout << "wrote " << pairs.size() << " pairs to " << a.out << ".csv\n";
  return 0;
}

// --------------------------------------------------------------------- probe

struct ProbeArgs {
  std::vector<std::string> embs;
  std::string labels, out;
  std::vector<std::string> props;
  double test_frac = 0.2;
  bool stratified = true;
  double l2 = 1.0;
  double ridge_l2 = 1e-6;
  std::uint64_t seed = 0;
};

int run_probe(const ProbeArgs& a) {
  const LabelTable labels = load_labels(a.labels, schema_path_for(a.labels));
  const SplitSpec split{a.test_frac, a.seed, a.stratified};
  ProbeRunOptions opts;
  opts.glm.l2 = a.l2;
  opts.ridge_l2 = a.ridge_l2;

  struct LongRow {
    RunMeta meta;
    ReportRow r;
  };
  std::vector<LongRow> rows;
  for (const auto& path : a.embs) {
    const EmbeddingTable emb = load_embeddings(path, detect_emb_format(path));
    const RunMeta meta = emb.meta.value_or(RunMeta{std::filesystem::path(path).stem().string(), 0, 0});
    for (auto& r : run_linear_probing(emb, labels, a.props, split, opts)) rows.push_back({meta, std::move(r)});
  }
  std::sort(rows.begin(), rows.end(), [](const LongRow& x, const LongRow& y) {
    return std::tie(x.meta.model, x.meta.epoch, x.meta.layer, x.r.property, x.r.metric) <
           std::tie(y.meta.model, y.meta.epoch, y.meta.layer, y.r.property, y.r.metric);
  });

  auto out = open_out(a.out);
  out << "model,epoch,layer,property,metric,value,n_train,n_test,converged,reason\n";
  for (const auto& lr : rows) {
    out << csv::escape(lr.meta.model) << "," << lr.meta.epoch << "," << lr.meta.layer << ","
        << csv::escape(lr.r.property) << "," << lr.r.metric << ","
        << (std::isnan(lr.r.value) ? std::string("NA") : csv::fmt_double(lr.r.value)) << "," << lr.r.n_train
        << "," << lr.r.n_test << "," << (lr.r.converged ? "true" : "false") << "," << csv::escape(lr.r.reason)
        << "\n";
  }
  std::cout << "wrote " << rows.size() << " report rows to " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------------- bmi

struct BmiArgs {
  std::string emb, labels, prop, out;
  std::vector<std::uint64_t> sizes;
  double alpha = 1.0;
  double l2 = 1.0;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
};

int run_bmi(const BmiArgs& a, bool no_timestamp) {
  const EmbeddingTable emb = load_embeddings(a.emb, detect_emb_format(a.emb));
  const LabelTable labels = load_labels(a.labels, schema_path_for(a.labels));
  const JoinResult jr = join(emb, labels, a.prop);
  if (!jr.ds.kind.is_classy())
    fail("bmi needs a binary or categorical property; '" + a.prop + "' is " + kind_to_string(jr.ds.kind));

  const Split eval_split = split_stratified(jr.ds.p, a.test_frac, a.seed);
  const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(jr.ds.kind.class_count(), a.alpha);
  std::vector<std::size_t> sizes(a.sizes.begin(), a.sizes.end());
  const BmiCurve curve = bmi_curve(jr.ds, sizes, eval_split, alpha, a.l2, a.seed);

  for (const auto& s : curve.skipped)
    std::cerr << "warning: size " << s.n_train << " skipped: " << s.reason << "\n";
  if (curve.clamp_events > 0)
    std::cerr << "note: " << curve.clamp_events << " predicted probabilities clamped at 1e-12\n";

  if (a.out.ends_with(".json")) {
    json j{{"property", a.prop},
           {"alpha", to_vec(curve.alpha)},
           {"l2", curve.l2},
           {"seed", curve.seed},
           {"clamp_events", curve.clamp_events}};
    if (!no_timestamp) j["generated_at"] = utc_timestamp();
    j["points"] = json::array();
    for (const auto& p : curve.points)
      j["points"].push_back(json{{"n_train", p.n_train}, {"h_p", p.h_p}, {"h_p_given_z", p.h_p_given_z}, {"bmi", p.bmi}});
    j["skipped"] = json::array();
    for (const auto& s : curve.skipped) j["skipped"].push_back(json{{"n_train", s.n_train}, {"reason", s.reason}});
    write_json_file(j, a.out);
  } else {
    auto out = open_out(a.out);
    out << "n_train,h_p,h_p_given_z,bmi\n";
    for (const auto& p : curve.points)
      out << p.n_train << "," << csv::fmt_double(p.h_p) << "," << csv::fmt_double(p.h_p_given_z) << ","
          << csv::fmt_double(p.bmi) << "\n";
  }
  std::cout << "wrote " << curve.points.size() << " curve points to " << a.out << "\n";
  return 0;
}

// ------------------------------------------------------------------ pairwise

struct PairwiseArgs {
  std::string src_emb, tgt_emb, pairs, probe_labels, out;
  double test_frac = 0.2;
  double l2 = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t max_pairs = 1000000;  // 0 = no cap (exact mean over all pairs)
  int pca_k = 2;
};

int run_pairwise(const PairwiseArgs& a, bool no_timestamp) {
  const EmbeddingTable src = load_embeddings(a.src_emb, detect_emb_format(a.src_emb));
  const EmbeddingTable tgt = load_embeddings(a.tgt_emb, detect_emb_format(a.tgt_emb));
  if (src.Z.cols() != tgt.Z.cols())
    fail("source and target embedding dimensions differ (" + std::to_string(src.Z.cols()) + " vs " +
         std::to_string(tgt.Z.cols()) + ")");

  std::unordered_map<std::string, Eigen::Index> six, tix;
  for (Eigen::Index i = 0; i < src.Z.rows(); ++i) six.emplace(src.ids[static_cast<std::size_t>(i)], i);
  for (Eigen::Index i = 0; i < tgt.Z.rows(); ++i) tix.emplace(tgt.ids[static_cast<std::size_t>(i)], i);

  std::ifstream in(a.pairs);
  if (!in) fail("cannot open " + a.pairs);
  csv::Reader rd(in);
  std::vector<std::string> rec;
  if (!rd.next(rec) || rec != std::vector<std::string>{"source_id", "target_id", "group"})
    fail("pairs file " + a.pairs + " must start with header source_id,target_id,group");

  struct GroupRows {
    std::vector<Eigen::Index> s, t;
  };
  std::map<std::string, GroupRows> by_group;
  std::vector<std::string> unmatched;
  while (rd.next(rec)) {
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != 3)
      fail("pairs file " + a.pairs + " line " + std::to_string(rd.line_no()) + ": expected 3 fields");
    const auto s = six.find(rec[0]);
    const auto t = tix.find(rec[1]);
    if (s == six.end()) {
      unmatched.push_back("line " + std::to_string(rd.line_no()) + ": unknown source id '" + rec[0] + "'");
      continue;
    }
    if (t == tix.end()) {
      unmatched.push_back("line " + std::to_string(rd.line_no()) + ": unknown target id '" + rec[1] + "'");
      continue;
    }
    auto& g = by_group[rec[2]];
    g.s.push_back(s->second);
    g.t.push_back(t->second);
  }
  for (const auto& m : unmatched) std::cerr << "warning: " << m << "\n";

  std::map<std::string, PairEmbeddings> pemap;
  for (const auto& [gname, gr] : by_group) {
    PairEmbeddings pe;
    pe.group = gname;
    const Eigen::Index n = static_cast<Eigen::Index>(gr.s.size());
    pe.Z.resize(n, src.Z.cols());
    pe.Zp.resize(n, src.Z.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      pe.Z.row(i) = src.Z.row(gr.s[static_cast<std::size_t>(i)]);
      pe.Zp.row(i) = tgt.Z.row(gr.t[static_cast<std::size_t>(i)]);
    }
    pemap.emplace(gname, std::move(pe));
  }

  PairwiseOptions opts;
  opts.max_pairs = a.max_pairs == 0 ? std::nullopt : std::optional<std::size_t>(a.max_pairs);
  opts.seed = a.seed;
  opts.test_frac = a.test_frac;
  opts.fit.l2 = a.l2;
  opts.pca_k = a.pca_k;

  std::vector<PairwiseReport> reports;
  std::vector<std::pair<std::string, std::string>> omitted;
  for (const auto& [gname, pe] : pemap) {
    if (pe.n() < 2) {
      omitted.emplace_back(gname, "fewer than 2 matched pairs");
      std::cerr << "warning: group '" << gname << "' skipped: fewer than 2 matched pairs\n";
      continue;
    }
    reports.push_back(analyze_pairs(pe, opts));
  }
  if (reports.empty()) fail("no group has at least 2 matched pairs");

  json jrep{{"source", a.src_emb}, {"target", a.tgt_emb}};
  if (!no_timestamp) jrep["generated_at"] = utc_timestamp();
  jrep["groups"] = json::array();
  for (const auto& r : reports) {
    json jg{{"group", r.group},
            {"n_pairs", r.n_pairs},
            {"cosine", json{{"mean", r.cosine.mean},
                            {"pairs_used", r.cosine.pairs_used},
                            {"zero_rows_excluded", r.cosine.zero_rows_excluded},
                            {"sampled", r.cosine.sampled}}},
            {"v_ate", to_vec(r.v_ate)},
            {"ate_skipped_rows", r.ate_skipped},
            {"explained_variance_ratio", to_vec(r.pca.explained_variance_ratio)},
            {"probe", json{{"auc", r.probe.auc},
                           {"n_train_pairs", r.probe.n_train_pairs},
                           {"n_test_pairs", r.probe.n_test_pairs},
                           {"converged", r.probe.converged}}}};
    jg["c_ate_pair"] = nan_to_null(r.c_ate_pair);
    jrep["groups"].push_back(std::move(jg));
  }
  jrep["omitted_groups"] = json::array();
  for (const auto& [g, why] : omitted) jrep["omitted_groups"].push_back(json{{"group", g}, {"reason", why}});
  jrep["unmatched"] = unmatched;

  {
    auto out = open_out(a.out + ".pca.csv");
    out << "group";
    for (int k = 0; k < a.pca_k; ++k) out << ",pc" << (k + 1);
    out << ",role\n";
    for (const auto& r : reports) {
      const auto& P = r.pca.projections;  // sources stacked above targets
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        out << csv::escape(r.group);
        for (int k = 0; k < a.pca_k; ++k)
          out << "," << (k < P.cols() ? csv::fmt_double(P(i, k)) : std::string("NA"));
        out << "," << (i < P.rows() / 2 ? "source" : "target") << "\n";
      }
    }
  }
  {
    auto out = open_out(a.out + ".cosine.csv");
    out << "group,bin_left,bin_right,count\n";
    for (const auto& r : reports) {
      const double nb = static_cast<double>(r.cosine.hist.size());
      for (std::size_t b = 0; b < r.cosine.hist.size(); ++b)
        out << csv::escape(r.group) << "," << csv::fmt_double((2.0 * static_cast<double>(b) - nb) / nb) << ","
            << csv::fmt_double((2.0 * static_cast<double>(b + 1) - nb) / nb) << "," << r.cosine.hist[b]
            << "\n";
    }
  }

  if (!a.probe_labels.empty()) {
    const LabelTable plabels = load_labels(a.probe_labels, schema_path_for(a.probe_labels));
    std::vector<std::pair<std::string, LinearProbe>> probes;
    std::vector<std::pair<std::string, std::string>> probe_errors;
    std::vector<std::string> names;
    for (const auto& col : plabels.columns)
      if (col.kind.kind == Kind::Binary) names.push_back(col.name);
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      try {
        const JoinResult pj = join(src, plabels, name);
        FitOptions fo;
        fo.l2 = a.l2;
        probes.emplace_back(name, fit_logistic(pj.ds.Z, pj.ds.p, fo, 2));
      } catch (const Error& e) {
        probe_errors.emplace_back(name, e.what());
        std::cerr << "warning: probe for '" << name << "' skipped: " << e.what() << "\n";
      }
    }
    if (probes.empty()) fail("no usable binary property in " + a.probe_labels);
    const CausalMatrix cm = causal_effect_matrix(probes, pemap);
    for (const auto& [g, why] : cm.omitted)
      std::cerr << "warning: causal matrix omits group '" << g << "': " << why << "\n";

    auto out = open_out(a.out + ".causal.csv");
    out << "group,property,raw,centered\n";
    for (std::size_t gi = 0; gi < cm.groups.size(); ++gi)
      for (std::size_t yi = 0; yi < cm.properties.size(); ++yi)
        out << csv::escape(cm.groups[gi]) << "," << csv::escape(cm.properties[yi]) << ","
            << csv::fmt_double(cm.raw(static_cast<Eigen::Index>(gi), static_cast<Eigen::Index>(yi))) << ","
            << csv::fmt_double(cm.centered(static_cast<Eigen::Index>(gi), static_cast<Eigen::Index>(yi)))
            << "\n";

    json jc{{"properties", cm.properties}};
    jc["omitted_groups"] = json::array();
    for (const auto& [g, why] : cm.omitted) jc["omitted_groups"].push_back(json{{"group", g}, {"reason", why}});
    jc["probe_errors"] = json::array();
    for (const auto& [p, why] : probe_errors) jc["probe_errors"].push_back(json{{"property", p}, {"reason", why}});
    jrep["causal"] = std::move(jc);
  }

  write_json_file(jrep, a.out + ".report.json");
  std::cout << "wrote pairwise report for " << reports.size() << " group(s) to " << a.out << ".report.json\n";
  return (unmatched.empty() && omitted.empty()) ? 0 : 2;
}

// --------------------------------------------------------------------- synth

struct SynthArgs {
  std::string mechanism = "linear_binary";
  std::string out, format = "csv";
  std::uint64_t n = 0;
  std::int64_t d = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a, bool no_timestamp) {
  SynthSpec spec;
  spec.n = a.n;
  spec.d = static_cast<Eigen::Index>(a.d);
  spec.mechanism = parse_mechanism(a.mechanism);
  spec.noise_sigma = a.sigma;
  spec.seed = a.seed;
  const auto result = gen(spec);

  json meta{{"mechanism", mechanism_to_string(spec.mechanism)},
            {"n", a.n},
            {"d", a.d},
            {"sigma", a.sigma},
            {"seed", a.seed}};
  if (!no_timestamp) meta["generated_at"] = utc_timestamp();

  const bool f32 = a.format == "f32";
  if (const auto* data = std::get_if<SynthData>(&result)) {
    const std::string emb_path = a.out + (f32 ? ".emb.f32" : ".emb.csv");
    if (f32) save_embeddings_f32(data->emb, emb_path);
    else save_embeddings_csv(data->emb, emb_path);
    save_labels(data->labels, a.out + ".labels.csv", a.out + ".labels.schema.json");
    meta["signal_dir"] = to_vec(data->signal_dir);
    std::cout << "wrote " << data->emb.ids.size() << " rows to " << emb_path << " and " << a.out
              << ".labels.csv\n";
  } else {
    const auto& sp = std::get<SynthPairs>(result);
    const std::size_t n = sp.pairs.n();
    EmbeddingTable s, t;
    s.Z = sp.pairs.Z;
    t.Z = sp.pairs.Zp;
    s.ids.reserve(n);
    t.ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.ids.push_back("s" + std::to_string(i));
      t.ids.push_back("t" + std::to_string(i));
    }
    const std::string s_path = a.out + (f32 ? ".source.emb.f32" : ".source.emb.csv");
    const std::string t_path = a.out + (f32 ? ".target.emb.f32" : ".target.emb.csv");
    if (f32) {
      save_embeddings_f32(s, s_path);
      save_embeddings_f32(t, t_path);
    } else {
      save_embeddings_csv(s, s_path);
      save_embeddings_csv(t, t_path);
    }
    auto out = open_out(a.out + ".pairs.csv");
    out << "source_id,target_id,group\n";
    for (std::size_t i = 0; i < n; ++i) out << s.ids[i] << "," << t.ids[i] << "," << sp.pairs.group << "\n";
    meta["signal_dir"] = to_vec(sp.signal_dir);
    std::cout << "wrote " << n << " pairs to " << a.out << ".pairs.csv\n";
  }
  write_json_file(meta, a.out + ".meta.json");
  return 0;
}

// -------------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> ins;
  std::vector<std::string> correlate;  // each entry "famA,famB"
  std::string out;
};

// A metric family is "metric" or "metric:property-prefix".
struct Family {
  std::string spec, metric, prefix;
};

Family parse_family(const std::string& spec) {
  Family f;
  f.spec = spec;
  const auto colon = spec.find(':');
  f.metric = spec.substr(0, colon);
  if (colon != std::string::npos) f.prefix = spec.substr(colon + 1);
  if (f.metric.empty()) fail("empty metric in family '" + spec + "'");
  return f;
}

int run_report(const ReportArgs& a) {
  struct Row {
    std::string model, property, metric;
    double value = 0;
    bool na = false;
  };
  static const std::vector<std::string> kHeader = {"model",   "epoch",   "layer",     "property", "metric",
                                                   "value",   "n_train", "n_test",    "converged", "reason"};
  std::vector<Row> rows;
  for (const auto& path : a.ins) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    csv::Reader rd(in);
    std::vector<std::string> rec;
    if (!rd.next(rec) || rec != kHeader) fail(path + " is not a long-format probing report (bad header)");
    while (rd.next(rec)) {
      if (rec.size() == 1 && rec[0].empty()) continue;
      if (rec.size() != kHeader.size())
        fail(path + " line " + std::to_string(rd.line_no()) + ": expected " + std::to_string(kHeader.size()) +
             " fields");
      Row r;
      r.model = rec[0];
      r.property = rec[3];
      r.metric = rec[4];
      if (rec[5] == "NA") r.na = true;
      else r.value = csv::parse_double_strict(rec[5], path + " line " + std::to_string(rd.line_no()));
      rows.push_back(std::move(r));
    }
  }
  if (rows.empty()) fail("no report rows in the input files");

  // families to aggregate: one per metric present, plus any named in --correlate
  std::map<std::string, Family> families;
  for (const auto& r : rows) families.emplace(r.metric, parse_family(r.metric));
  std::vector<std::pair<std::string, std::string>> corr_pairs;
  for (const auto& spec : a.correlate) {
    const auto comma = spec.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == spec.size())
      fail("--correlate expects two comma-separated families, got '" + spec + "'");
    const std::string fa = spec.substr(0, comma), fb = spec.substr(comma + 1);
    families.emplace(fa, parse_family(fa));
    families.emplace(fb, parse_family(fb));
    corr_pairs.emplace_back(fa, fb);
  }

  struct Agg {
    double sum = 0;
    std::size_t n = 0, n_missing = 0;
  };
  std::map<std::pair<std::string, std::string>, Agg> agg;  // (family, model) -> stats
  std::map<std::string, std::size_t> family_rows;
  for (const auto& [spec, fam] : families) {
    for (const auto& r : rows) {
      if (r.metric != fam.metric || !r.property.starts_with(fam.prefix)) continue;
      ++family_rows[spec];
      auto& s = agg[{spec, r.model}];
      if (r.na) ++s.n_missing;
      else {
        s.sum += r.value;
        ++s.n;
      }
    }
  }

  for (const auto& [fa, fb] : corr_pairs)
    for (const auto& f : {fa, fb})
      if (family_rows[f] == 0) fail("metric family '" + f + "' matched no rows");

  auto out = open_out(a.out);
  out << "family,model,mean_value,n_rows,n_missing\n";
  for (const auto& [key, s] : agg) {
    out << csv::escape(key.first) << "," << csv::escape(key.second) << ","
        << (s.n > 0 ? csv::fmt_double(s.sum / static_cast<double>(s.n)) : std::string("NA")) << "," << s.n
        << "," << s.n_missing << "\n";
  }
  std::cout << "wrote " << agg.size() << " aggregate rows to " << a.out << "\n";

  if (!corr_pairs.empty()) {
    const std::string corr_path = strip_suffix(a.out, ".csv") + ".corr.csv";
    auto corr_out = open_out(corr_path);
    corr_out << "family_a,family_b,r,n_models\n";
    for (const auto& [fa, fb] : corr_pairs) {
      std::vector<std::string> models;
      for (const auto& [key, s] : agg)
        if (key.first == fa && s.n > 0 && agg.count({fb, key.second}) && agg[{fb, key.second}].n > 0)
          models.push_back(key.second);
      Eigen::VectorXd xs(static_cast<Eigen::Index>(models.size())), ys(xs.size());
      for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& sa = agg[{fa, models[i]}];
        const auto& sb = agg[{fb, models[i]}];
        xs(static_cast<Eigen::Index>(i)) = sa.sum / static_cast<double>(sa.n);
        ys(static_cast<Eigen::Index>(i)) = sb.sum / static_cast<double>(sb.n);
      }
      const double r = correlation(xs, ys);
      corr_out << csv::escape(fa) << "," << csv::escape(fb) << "," << csv::fmt_double(r) << "," << models.size()
               << "\n";
    }
    std::cout << "wrote " << corr_pairs.size() << " correlation(s) to " << corr_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear, Bayesian and pairwise probing over embedding tables"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags override its values");
  bool no_timestamp = false;
  app.add_flag("--no-timestamp", no_timestamp, "omit generated_at from JSON outputs");

  int rc = 0;

  GenLabelsArgs gl;
  auto* gl_cmd =
      app.add_subcommand("gen-labels", "compute molecular property labels for a SMILES file")->configurable();
  gl_cmd->add_option("--smiles", gl.smiles, "input .smi file (id<TAB>smiles or bare SMILES per line)")
      ->required();
  gl_cmd->add_option("--props", gl.props, "count_<element> and functional-group names")
      ->required()
      ->delimiter(',');
  gl_cmd->add_option("--out", gl.out, "labels CSV; schema and error sidecars written alongside")->required();
  gl_cmd->add_option("--library", gl.library, "custom group library JSON");
  gl_cmd->callback([&] { rc = run_gen_labels(gl); });

  GenPairsArgs gp;
  auto* gp_cmd =
      app.add_subcommand("gen-pairs", "build counterfactual molecule pairs by removing a group")->configurable();
  gp_cmd->add_option("--smiles", gp.smiles, "input .smi file")->required();
  gp_cmd->add_option("--group", gp.group, "functional group to remove")->required();
  gp_cmd->add_option("--out", gp.out, "output stem: <stem>.csv, <stem>.source.smi, <stem>.target.smi")
      ->required();
  gp_cmd->add_option("--limit", gp.limit, "keep at most N pairs (seeded subsample)");
  gp_cmd->add_option("--seed", gp.seed, "subsample seed");
  gp_cmd->add_option("--library", gp.library, "custom group library JSON");
  gp_cmd->callback([&] { rc = run_gen_pairs(gp); });

  ProbeArgs pr;
  auto* pr_cmd = app.add_subcommand("probe", "linear probing report over embedding files")->configurable();
  pr_cmd->add_option("--emb", pr.embs, "embedding files (.csv or .f32; sidecar JSON tags model/epoch/layer)")
      ->required();
  pr_cmd->add_option("--labels", pr.labels, "labels CSV (schema JSON alongside)")->required();
  pr_cmd->add_option("--props", pr.props, "properties to probe")->required()->delimiter(',');
  pr_cmd->add_option("--test-frac", pr.test_frac, "held-out fraction");
  pr_cmd->add_flag("--stratified,!--no-stratified", pr.stratified, "stratify splits for class labels");
  pr_cmd->add_option("--l2", pr.l2, "L2 strength for logistic/Poisson probes");
  pr_cmd->add_option("--ridge-l2", pr.ridge_l2, "L2 strength for ridge probes");
  pr_cmd->add_option("--seed", pr.seed, "split seed");
  pr_cmd->add_option("--out", pr.out, "long-format report CSV")->required();
  pr_cmd->callback([&] { rc = run_probe(pr); });

  BmiArgs bm;
  auto* bm_cmd = app.add_subcommand("bmi", "Bayesian mutual information curve")->configurable();
  bm_cmd->add_option("--emb", bm.emb, "embedding file")->required();
  bm_cmd->add_option("--labels", bm.labels, "labels CSV")->required();
  bm_cmd->add_option("--prop", bm.prop, "binary or categorical property")->required();
  bm_cmd->add_option("--sizes", bm.sizes, "training sizes, ascending")->required()->delimiter(',');
  bm_cmd->add_option("--alpha", bm.alpha, "symmetric Dirichlet concentration");
  bm_cmd->add_option("--l2", bm.l2, "probe L2 strength");
  bm_cmd->add_option("--test-frac", bm.test_frac, "held-out evaluation fraction");
  bm_cmd->add_option("--seed", bm.seed, "split/subsample seed");
  bm_cmd->add_option("--out", bm.out, "output CSV, or JSON when the path ends in .json")->required();
  bm_cmd->callback([&] { rc = run_bmi(bm, no_timestamp); });

  PairwiseArgs pw;
  auto* pw_cmd = app.add_subcommand("pairwise", "pairwise probing analysis over counterfactual pairs")
                     ->configurable();
  pw_cmd->add_option("--src-emb", pw.src_emb, "source embeddings")->required();
  pw_cmd->add_option("--tgt-emb", pw.tgt_emb, "target embeddings")->required();
  pw_cmd->add_option("--pairs", pw.pairs, "pairs CSV (source_id,target_id,group)")->required();
  pw_cmd->add_option("--probe-labels", pw.probe_labels,
                     "labels CSV over source ids; adds the causal effect matrix");
  pw_cmd->add_option("--test-frac", pw.test_frac, "held-out fraction for the pair probe");
  pw_cmd->add_option("--l2", pw.l2, "probe L2 strength");
  pw_cmd->add_option("--seed", pw.seed, "sampling/split seed");
  pw_cmd->add_option("--max-pairs", pw.max_pairs, "cosine pair budget before sampling kicks in (0 = exact)");
  pw_cmd->add_option("--pca-k", pw.pca_k, "principal components to keep");
  pw_cmd->add_option("--out", pw.out,
                     "output stem: <stem>.report.json, <stem>.pca.csv, <stem>.cosine.csv[, <stem>.causal.csv]")
      ->required();
  pw_cmd->callback([&] { rc = run_pairwise(pw, no_timestamp); });

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "synthetic embeddings with known ground truth")->configurable();
  sy_cmd->add_option("--mechanism", sy.mechanism,
                     "linear_binary | linear_count | linear_continuous | one_hot | independent | paired");
  sy_cmd->add_option("--n", sy.n, "rows")->required();
  sy_cmd->add_option("--d", sy.d, "embedding dimension")->required();
  sy_cmd->add_option("--sigma", sy.sigma, "noise scale");
  sy_cmd->add_option("--seed", sy.seed, "generator seed");
  sy_cmd->add_option("--format", sy.format, "embedding file format")->check(CLI::IsMember({"csv", "f32"}));
  sy_cmd->add_option("--out", sy.out, "output stem")->required();
  sy_cmd->callback([&] { rc = run_synth(sy, no_timestamp); });

  ReportArgs rp;
  auto* rp_cmd = app.add_subcommand("report", "aggregate long-format reports and correlate metric families")
                     ->configurable();
  rp_cmd->add_option("--in", rp.ins, "long-format report CSVs")->required();
  rp_cmd->add_option("--correlate", rp.correlate,
                     "two families 'A,B' to correlate across models; family = metric[:property-prefix]");
  rp_cmd->add_option("--out", rp.out, "aggregate CSV; correlations go to <stem>.corr.csv")->required();
  rp_cmd->callback([&] { rc = run_report(rp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
