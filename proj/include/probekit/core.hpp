#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace probekit {

enum class Kind { Binary, Categorical, Count, Continuous };

struct PropertyKind {
  Kind kind = Kind::Continuous;
  int n_classes = 0;  // only meaningful for Categorical (C >= 2)

  bool is_classy() const { return kind == Kind::Binary || kind == Kind::Categorical; }
  int class_count() const { return kind == Kind::Binary ? 2 : n_classes; }
};

// "binary" | "categorical:<C>" | "count" | "continuous"
PropertyKind parse_kind(const std::string& s);
std::string kind_to_string(const PropertyKind& k);

struct RunMeta {
  std::string model;
  int epoch = 0;
  int layer = 0;
};

struct EmbeddingTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd Z;  // n x d, row i belongs to ids[i]
  std::optional<RunMeta> meta;
};

struct LabelColumn {
  std::string name;
  PropertyKind kind;
  Eigen::VectorXd values;  // NaN marks a missing cell
};

struct LabelTable {
  std::vector<std::string> ids;
  std::vector<LabelColumn> columns;

  const LabelColumn* find(const std::string& name) const;
};

struct ProbingDataset {
  Eigen::MatrixXd Z;
  Eigen::VectorXd p;
  PropertyKind kind;
  std::vector<std::string> ids;

  std::size_t n() const { return static_cast<std::size_t>(Z.rows()); }
};

struct JoinResult {
  ProbingDataset ds;
  std::size_t dropped = 0;  // id-matched rows discarded for a missing label
};

struct Split {
  std::vector<std::size_t> train_idx, test_idx;
  std::uint64_t seed = 0;
};

struct Standardizer {
  Eigen::VectorXd mean, scale;  // scale = population std, zeros replaced by 1
};

enum class EmbFormat { Csv, F32 };

// CSV: header `id,e0,...,e{d-1}`. F32: row-major little-endian floats with a
// `<path>.json` sidecar {n, d, ids, meta}. A CSV may carry the same sidecar
// for its meta tag. Parse errors name the offending row/column.
EmbeddingTable load_embeddings(const std::string& path, EmbFormat format);

void save_embeddings_csv(const EmbeddingTable& t, const std::string& path);
void save_embeddings_f32(const EmbeddingTable& t, const std::string& path);

// Label CSV (`id,<prop>,...`, empty cell = missing) plus a JSON schema file
// mapping each property name to its kind string.
LabelTable load_labels(const std::string& csv_path, const std::string& schema_path);
void save_labels(const LabelTable& t, const std::string& csv_path, const std::string& schema_path);

JoinResult join(const EmbeddingTable& emb, const LabelTable& labels, const std::string& property);

Split split_random(std::size_t n, double test_frac, std::uint64_t seed);

// Per-class proportional split; a singleton class is an error, a single
// all-covering class degrades to split_random with a warning on stderr.
Split split_stratified(const Eigen::VectorXd& p, double test_frac, std::uint64_t seed);

Standardizer fit_standardizer(const Eigen::MatrixXd& Z_train);
Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& Z);

// Uniform without replacement, stratified for binary/categorical kinds when
// every class can contribute at least one row. Row order is preserved.
ProbingDataset subsample(const ProbingDataset& ds, std::size_t m, std::uint64_t seed);

ProbingDataset take_rows(const ProbingDataset& ds, const std::vector<std::size_t>& rows);

}  // namespace probekit
