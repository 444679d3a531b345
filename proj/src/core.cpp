#include "probekit/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"

namespace probekit {

using nlohmann::json;

PropertyKind parse_kind(const std::string& s) {
  if (s == "binary") return {Kind::Binary, 2};
  if (s == "count") return {Kind::Count, 0};
  if (s == "continuous") return {Kind::Continuous, 0};
  if (s.rfind("categorical:", 0) == 0) {
    const std::string c = s.substr(12);
    int n = 0;
    try {
      n = std::stoi(c);
    } catch (...) {
      fail("bad categorical class count '" + c + "'");
    }
    if (n < 2) fail("categorical kind needs at least 2 classes, got '" + s + "'");
    return {Kind::Categorical, n};
  }
  fail("unknown property kind '" + s + "'");
}

std::string kind_to_string(const PropertyKind& k) {
  switch (k.kind) {
    case Kind::Binary: return "binary";
    case Kind::Count: return "count";
    case Kind::Continuous: return "continuous";
    case Kind::Categorical: return "categorical:" + std::to_string(k.n_classes);
  }
  fail("corrupt kind");
}

const LabelColumn* LabelTable::find(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::optional<RunMeta> read_meta_sidecar(const json& j) {
  if (!j.contains("meta") || j["meta"].is_null()) return std::nullopt;
  const json& m = j["meta"];
  RunMeta meta;
  meta.model = m.value("model", std::string{});
  meta.epoch = m.value("epoch", 0);
  meta.layer = m.value("layer", 0);
  if (meta.epoch < 0 || meta.layer < 0) fail("sidecar meta epoch/layer must be >= 0");
  return meta;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

void check_unique_ids(const std::vector<std::string>& ids, const std::string& path) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail("duplicate id '" + id + "' in " + path);
}

EmbeddingTable load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) fail("empty embedding file " + path);
  if (row.size() < 2 || row[0] != "id") fail("malformed header in " + path + ": expected id,e0,...");
  const std::size_t d = row.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    if (row[j + 1] != "e" + std::to_string(j))
      fail("malformed header in " + path + ": column " + std::to_string(j + 1) + " should be e" + std::to_string(j));

  EmbeddingTable t;
  std::vector<double> buf;
  std::size_t r = 0;
  while (reader.next(row)) {
    ++r;
    if (row.size() == 1 && row[0].empty()) continue;  // tolerate a trailing blank line
    if (row.size() != d + 1)
      fail(path + " row " + std::to_string(r) + ": expected " + std::to_string(d + 1) + " cells, got " +
           std::to_string(row.size()));
    t.ids.push_back(row[0]);
    for (std::size_t j = 0; j < d; ++j)
      buf.push_back(csv::parse_double_strict(row[j + 1], path + " row " + std::to_string(r) + " column e" + std::to_string(j)));
  }
  check_unique_ids(t.ids, path);
  const std::size_t n = t.ids.size();
  t.Z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) t.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[i * d + j];

  const std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) t.meta = read_meta_sidecar(load_json_file(sidecar));
  return t;
}

EmbeddingTable load_embeddings_f32(const std::string& path) {
  const json j = load_json_file(path + ".json");
  if (!j.contains("n") || !j.contains("d") || !j.contains("ids")) fail("sidecar " + path + ".json needs n, d, ids");
  const std::size_t n = j["n"].get<std::size_t>();
  const std::size_t d = j["d"].get<std::size_t>();
  if (d < 1) fail("sidecar " + path + ".json: d must be >= 1");

  EmbeddingTable t;
  t.ids = j["ids"].get<std::vector<std::string>>();
  if (t.ids.size() != n) fail("sidecar " + path + ".json: ids length != n");
  check_unique_ids(t.ids, path);
  t.meta = read_meta_sidecar(j);

  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != n * d * 4)
    fail(path + ": expected " + std::to_string(n * d * 4) + " bytes, got " + std::to_string(bytes.size()));

  t.Z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jx = 0; jx < d; ++jx) {
      std::uint32_t u;
      std::memcpy(&u, bytes.data() + (i * d + jx) * 4, 4);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
      float f;
      std::memcpy(&f, &u, 4);
      if (!std::isfinite(f))
        fail(path + ": non-finite value at row " + std::to_string(i + 1) + " column e" + std::to_string(jx));
      t.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jx)) = static_cast<double>(f);
    }
  }
  return t;
}

json meta_to_json(const std::optional<RunMeta>& meta) {
  if (!meta) return nullptr;
  return json{{"model", meta->model}, {"epoch", meta->epoch}, {"layer", meta->layer}};
}

void validate_label(double v, const PropertyKind& k, const std::string& where) {
  if (!std::isfinite(v)) fail("non-finite label at " + where);
  const bool integral = std::floor(v) == v;
  switch (k.kind) {
    case Kind::Binary:
      if (v != 0.0 && v != 1.0) fail("binary label must be 0 or 1 at " + where);
      break;
    case Kind::Categorical:
      if (!integral || v < 0 || v >= k.n_classes) fail("categorical label out of range at " + where);
      break;
    case Kind::Count:
      if (!integral || v < 0) fail("count label must be a non-negative integer at " + where);
      break;
    case Kind::Continuous:
      break;
  }
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path, EmbFormat format) {
  return format == EmbFormat::Csv ? load_embeddings_csv(path) : load_embeddings_f32(path);
}

void save_embeddings_csv(const EmbeddingTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << "id";
  for (Eigen::Index j = 0; j < t.Z.cols(); ++j) out << ",e" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < t.Z.rows(); ++i) {
    out << csv::escape(t.ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < t.Z.cols(); ++j) out << "," << csv::fmt_double(t.Z(i, j));
    out << "\n";
  }
  if (t.meta) {
    std::ofstream side(path + ".json");
    side << json{{"meta", meta_to_json(t.meta)}}.dump(2) << "\n";
  }
}

void save_embeddings_f32(const EmbeddingTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  for (Eigen::Index i = 0; i < t.Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.Z.cols(); ++j) {
      const float f = static_cast<float>(t.Z(i, j));
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
      out.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
  json side{{"n", t.Z.rows()}, {"d", t.Z.cols()}, {"ids", t.ids}, {"meta", meta_to_json(t.meta)}};
  std::ofstream sout(path + ".json");
  if (!sout) fail("cannot write " + path + ".json");
  sout << side.dump(2) << "\n";
}

LabelTable load_labels(const std::string& csv_path, const std::string& schema_path) {
  const json schema = load_json_file(schema_path);
  if (!schema.is_object()) fail("schema " + schema_path + " must be a JSON object");

  std::ifstream in(csv_path);
  if (!in) fail("cannot open " + csv_path);
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) fail("empty label file " + csv_path);
  if (row.empty() || row[0] != "id") fail("malformed header in " + csv_path + ": first column must be id");

  LabelTable t;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (!schema.contains(row[j])) fail("property '" + row[j] + "' not declared in " + schema_path);
    t.columns.push_back({row[j], parse_kind(schema[row[j]].get<std::string>()), {}});
  }

  std::vector<std::vector<double>> cols(t.columns.size());
  std::size_t r = 0;
  while (reader.next(row)) {
    ++r;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.columns.size() + 1)
      fail(csv_path + " row " + std::to_string(r) + ": expected " + std::to_string(t.columns.size() + 1) + " cells");
    t.ids.push_back(row[0]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string& cell = row[j + 1];
      if (cell.empty()) {
        cols[j].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const std::string where = csv_path + " row " + std::to_string(r) + " column " + t.columns[j].name;
      const double v = csv::parse_double_strict(cell, where);
      validate_label(v, t.columns[j].kind, where);
      cols[j].push_back(v);
    }
  }
  check_unique_ids(t.ids, csv_path);
  for (std::size_t j = 0; j < cols.size(); ++j)
    t.columns[j].values = Eigen::Map<Eigen::VectorXd>(cols[j].data(), static_cast<Eigen::Index>(cols[j].size()));
  return t;
}

void save_labels(const LabelTable& t, const std::string& csv_path, const std::string& schema_path) {
  std::ofstream out(csv_path);
  if (!out) fail("cannot write " + csv_path);
  out << "id";
  for (const auto& c : t.columns) out << "," << csv::escape(c.name);
  out << "\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    out << csv::escape(t.ids[i]);
    for (const auto& c : t.columns) {
      const double v = c.values(static_cast<Eigen::Index>(i));
      out << ",";
      if (!std::isnan(v)) out << csv::fmt_double(v);
    }
    out << "\n";
  }
  json schema = json::object();
  for (const auto& c : t.columns) schema[c.name] = kind_to_string(c.kind);
  std::ofstream sout(schema_path);
  if (!sout) fail("cannot write " + schema_path);
  sout << schema.dump(2) << "\n";
}

JoinResult join(const EmbeddingTable& emb, const LabelTable& labels, const std::string& property) {
  const LabelColumn* col = labels.find(property);
  if (!col) fail("property '" + property + "' not found in label table");

  std::unordered_map<std::string, std::size_t> label_row;
  label_row.reserve(labels.ids.size());
  for (std::size_t i = 0; i < labels.ids.size(); ++i) label_row.emplace(labels.ids[i], i);

  JoinResult res;
  res.ds.kind = col->kind;
  std::vector<std::size_t> keep;
  std::vector<double> vals;
  bool any_match = false;
  for (std::size_t i = 0; i < emb.ids.size(); ++i) {
    auto it = label_row.find(emb.ids[i]);
    if (it == label_row.end()) continue;
    any_match = true;
    const double v = col->values(static_cast<Eigen::Index>(it->second));
    if (std::isnan(v)) {
      ++res.dropped;
      continue;
    }
    keep.push_back(i);
    vals.push_back(v);
  }
  if (!any_match) fail("join on property '" + property + "' produced no rows: no shared ids");

  res.ds.Z.resize(static_cast<Eigen::Index>(keep.size()), emb.Z.cols());
  res.ds.p.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    res.ds.Z.row(static_cast<Eigen::Index>(i)) = emb.Z.row(static_cast<Eigen::Index>(keep[i]));
    res.ds.p(static_cast<Eigen::Index>(i)) = vals[i];
    res.ds.ids.push_back(emb.ids[keep[i]]);
  }
  return res;
}

namespace {

std::size_t clamped_test_count(double test_frac, std::size_t n) {
  auto t = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  if (t < 1) t = 1;
  if (t > n - 1) t = n - 1;
  return t;
}

}  // namespace

Split split_random(std::size_t n, double test_frac, std::uint64_t seed) {
  if (n < 2) fail("split_random needs n >= 2, got " + std::to_string(n));
  if (!(test_frac > 0.0 && test_frac < 1.0)) fail("test_frac must lie in (0,1)");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  const std::size_t t = clamped_test_count(test_frac, n);
  Split s;
  s.seed = seed;
  s.test_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(t));
  s.train_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(t), perm.end());
  std::sort(s.test_idx.begin(), s.test_idx.end());
  std::sort(s.train_idx.begin(), s.train_idx.end());
  return s;
}

Split split_stratified(const Eigen::VectorXd& p, double test_frac, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(p.size());
  if (n < 2) fail("split_stratified needs n >= 2");
  if (!(test_frac > 0.0 && test_frac < 1.0)) fail("test_frac must lie in (0,1)");

  std::map<long long, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = p(static_cast<Eigen::Index>(i));
    if (std::floor(v) != v) fail("split_stratified expects integer class labels");
    classes[static_cast<long long>(v)].push_back(i);
  }
  if (classes.size() == 1) {
    std::cerr << "warning: single-class labels, falling back to random split\n";
    return split_random(n, test_frac, seed);
  }
  for (const auto& [cls, idx] : classes)
    if (idx.size() < 2) fail("class " + std::to_string(cls) + " has a single member; cannot stratify");

  Rng rng(seed);
  Split s;
  s.seed = seed;
  for (auto& [cls, idx] : classes) {
    (void)cls;
    rng.shuffle(idx);
    const std::size_t t = clamped_test_count(test_frac, idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) (i < t ? s.test_idx : s.train_idx).push_back(idx[i]);
  }
  std::sort(s.test_idx.begin(), s.test_idx.end());
  std::sort(s.train_idx.begin(), s.train_idx.end());
  return s;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& Z_train) {
  const auto n = Z_train.rows();
  if (n < 2) fail("fit_standardizer needs n >= 2");
  Standardizer s;
  s.mean = Z_train.colwise().mean();
  Eigen::VectorXd var = (Z_train.rowwise() - s.mean.transpose()).array().square().colwise().sum() / static_cast<double>(n);
  s.scale = var.array().sqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (s.scale(j) == 0.0) s.scale(j) = 1.0;
  return s;
}

Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& Z) {
  if (Z.cols() != s.mean.size()) fail("standardizer dimension mismatch");
  return (Z.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
}

ProbingDataset take_rows(const ProbingDataset& ds, const std::vector<std::size_t>& rows) {
  ProbingDataset out;
  out.kind = ds.kind;
  out.Z.resize(static_cast<Eigen::Index>(rows.size()), ds.Z.cols());
  out.p.resize(static_cast<Eigen::Index>(rows.size()));
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.Z.row(static_cast<Eigen::Index>(i)) = ds.Z.row(static_cast<Eigen::Index>(rows[i]));
    out.p(static_cast<Eigen::Index>(i)) = ds.p(static_cast<Eigen::Index>(rows[i]));
    if (!ds.ids.empty()) out.ids.push_back(ds.ids[rows[i]]);
  }
  return out;
}

ProbingDataset subsample(const ProbingDataset& ds, std::size_t m, std::uint64_t seed) {
  const std::size_t n = ds.n();
  if (m > n) fail("subsample m > n");
  if (m == n) return ds;

  Rng rng(seed);
  std::vector<std::size_t> chosen;

  if (ds.kind.is_classy()) {
    std::map<long long, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < n; ++i) classes[static_cast<long long>(ds.p(static_cast<Eigen::Index>(i)))].push_back(i);

    // largest-remainder allocation of m across classes
    struct Alloc { long long cls; std::size_t base, rem, size; };
    std::vector<Alloc> allocs;
    std::size_t assigned = 0;
    for (const auto& [cls, idx] : classes) {
      const std::size_t base = m * idx.size() / n;
      allocs.push_back({cls, base, m * idx.size() % n, idx.size()});
      assigned += base;
    }
    std::vector<std::size_t> order(allocs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return allocs[a].rem > allocs[b].rem; });
    for (std::size_t k = 0; assigned < m; ++k, ++assigned) ++allocs[order[k % order.size()]].base;

    const bool feasible = std::all_of(allocs.begin(), allocs.end(),
                                      [](const Alloc& a) { return a.base >= 1 && a.base <= a.size; });
    if (feasible) {
      for (const auto& a : allocs) {
        auto& idx = classes[a.cls];
        rng.shuffle(idx);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a.base));
      }
    }
  }

  if (chosen.empty()) {  // uniform fallback (also the path for count/continuous kinds)
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  }

  std::sort(chosen.begin(), chosen.end());
  return take_rows(ds, chosen);
}

}  // namespace probekit
