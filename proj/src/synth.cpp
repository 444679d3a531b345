#include "probekit/synth.hpp"

#include <cmath>
#include <utility>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"

namespace probekit {

Mechanism parse_mechanism(const std::string& s) {
  if (s == "linear_binary") return Mechanism::LinearBinary;
  if (s == "linear_count") return Mechanism::LinearCount;
  if (s == "linear_continuous") return Mechanism::LinearContinuous;
  if (s == "one_hot") return Mechanism::OneHot;
  if (s == "independent") return Mechanism::Independent;
  if (s == "paired") return Mechanism::Paired;
  fail("unknown mechanism '" + s + "'");
}

std::string mechanism_to_string(Mechanism m) {
  switch (m) {
    case Mechanism::LinearBinary: return "linear_binary";
    case Mechanism::LinearCount: return "linear_count";
    case Mechanism::LinearContinuous: return "linear_continuous";
    case Mechanism::OneHot: return "one_hot";
    case Mechanism::Independent: return "independent";
    case Mechanism::Paired: return "paired";
  }
  fail("unknown mechanism value");
}

namespace {

Eigen::VectorXd gauss_vec(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v(j) = rng.gauss();
  return v;
}

bool uses_signal_dir(Mechanism m) {
  return m != Mechanism::OneHot && m != Mechanism::Independent;
}

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

}  // namespace

std::variant<SynthData, SynthPairs> gen(const SynthSpec& spec) {
  if (spec.n < 2) fail("synth: n must be >= 2");
  if (spec.d < 1) fail("synth: d must be >= 1");
  if (!(spec.noise_sigma >= 0.0)) fail("synth: noise_sigma must be >= 0");

  Rng rng(spec.seed);
  const Eigen::Index d = spec.d;
  const auto n = static_cast<Eigen::Index>(spec.n);
  const double sigma = spec.noise_sigma;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  if (uses_signal_dir(spec.mechanism)) {
    if (spec.signal_dir) {
      if (spec.signal_dir->size() != d) fail("synth: signal_dir length does not match d");
      if (std::abs(spec.signal_dir->norm() - 1.0) > 1e-9) fail("synth: signal_dir must be unit-norm");
      u = *spec.signal_dir;
    } else {
      do {
        u = gauss_vec(rng, d);
      } while (u.norm() == 0.0);
      u /= u.norm();
    }
  }

  if (spec.mechanism == Mechanism::Paired) {
    SynthPairs out;
    out.signal_dir = u;
    out.pairs.group = "paired";
    out.pairs.Z.resize(n, d);
    out.pairs.Zp.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.pairs.Z.row(i) = (sigma * gauss_vec(rng, d)).transpose();
      out.pairs.Zp.row(i) = out.pairs.Z.row(i) - u.transpose() + sigma * gauss_vec(rng, d).transpose();
    }
    return out;
  }

  SynthData out;
  out.signal_dir = u;
  out.emb.ids = make_ids(spec.n);
  out.emb.Z.resize(n, d);

  LabelColumn col;
  col.name = "label";
  col.values.resize(n);

  switch (spec.mechanism) {
    case Mechanism::LinearBinary:
      col.kind = {Kind::Binary, 0};
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = static_cast<double>(rng.below(2));
        col.values(i) = p;
        out.emb.Z.row(i) = (p * u + sigma * gauss_vec(rng, d)).transpose();
      }
      break;
    case Mechanism::LinearCount:
      col.kind = {Kind::Count, 0};
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = static_cast<double>(rng.poisson(3.0));
        col.values(i) = p;
        out.emb.Z.row(i) = (std::log(p + 1.0) * u + sigma * gauss_vec(rng, d)).transpose();
      }
      break;
    case Mechanism::LinearContinuous:
      // z itself is the representation, so the noise has to land on the
      // label: p = u.z would be exactly recoverable at any sigma otherwise.
      col.kind = {Kind::Continuous, 0};
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd z = gauss_vec(rng, d);
        out.emb.Z.row(i) = z.transpose();
        col.values(i) = u.dot(z) + sigma * rng.gauss();
      }
      break;
    case Mechanism::OneHot:
      col.kind = d == 2 ? PropertyKind{Kind::Binary, 0}
                        : PropertyKind{Kind::Categorical, static_cast<int>(d)};
      out.emb.Z.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d)));
        col.values(i) = static_cast<double>(p);
        out.emb.Z(i, p) = 1.0;
      }
      break;
    case Mechanism::Independent:
      col.kind = {Kind::Binary, 0};
      for (Eigen::Index i = 0; i < n; ++i) {
        col.values(i) = static_cast<double>(rng.below(2));
        out.emb.Z.row(i) = gauss_vec(rng, d).transpose();
      }
      break;
    case Mechanism::Paired:
      fail("unreachable");
  }

  out.labels.ids = out.emb.ids;
  out.labels.columns.push_back(std::move(col));
  return out;
}

}  // namespace probekit
