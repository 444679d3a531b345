#pragma once

// Synthetic representation/label generators with known ground truth. These
// act as oracles for the estimators: every mechanism has a closed-form or
// by-construction answer that tests can check against.

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "probekit/core.hpp"
#include "probekit/pairwise.hpp"

namespace probekit {

enum class Mechanism {
  LinearBinary,      // p ~ Bernoulli(1/2), z = p*u + sigma*gaussian
  LinearCount,       // p ~ Poisson(3),     z = ln(p+1)*u + sigma*gaussian
  LinearContinuous,  // z gaussian,         p = u.z + sigma*gaussian
  OneHot,            // p uniform in 0..d-1, z = e_p
  Independent,       // p ~ Bernoulli(1/2), z gaussian, no relation
  Paired,            // z = sigma*gaussian, z' = z - u + sigma*gaussian
};

Mechanism parse_mechanism(const std::string& s);
std::string mechanism_to_string(Mechanism m);

struct SynthSpec {
  std::size_t n = 0;
  Eigen::Index d = 0;
  Mechanism mechanism = Mechanism::LinearBinary;
  // Unit vector of length d. When absent, one is drawn from the seed
  // (mechanisms that ignore it consume no draws and report a zero vector).
  std::optional<Eigen::VectorXd> signal_dir;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  EmbeddingTable emb;    // ids "s0", "s1", ...
  LabelTable labels;     // single column named "label"
  Eigen::VectorXd signal_dir;
};

struct SynthPairs {
  PairEmbeddings pairs;  // group "paired"
  Eigen::VectorXd signal_dir;
};

// Deterministic per (spec, seed): the draw order is pinned as
//   signal_dir (if used and absent), then rows in order, and within a row
//   the label draw before the noise draws.
// Returns SynthPairs for the paired mechanism, SynthData otherwise.
std::variant<SynthData, SynthPairs> gen(const SynthSpec& spec);

}  // namespace probekit
