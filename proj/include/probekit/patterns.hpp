#pragma once

// Small substructure language: atom predicates, bond order predicates and an
// optional ring-membership constraint. Matching is monomorphism search
// (extra molecule bonds between mapped atoms are allowed), deduplicated by
// mapped atom set.

#include <optional>
#include <string>
#include <vector>

#include "probekit/molecule.hpp"

namespace probekit {

struct AtomPred {
  std::string element;            // empty matches any element
  std::optional<bool> aromatic;
  std::optional<int> charge;
  int min_degree = 0;             // heavy-atom neighbors
  int min_h = 0;                  // total hydrogens
  bool only_single_bonds = false; // every bond on the molecule atom is single
};

enum class BondPred { Single, Double, Triple, Aromatic, Any };

struct PatternBond {
  int i = 0, j = 0;
  BondPred order = BondPred::Any;
};

// the mapped images of `atoms` must all lie inside one perceived ring of
// exactly `size` atoms
struct RingConstraint {
  std::vector<int> atoms;
  int size = 0;
};

struct Pattern {
  std::string name;
  std::vector<AtomPred> atoms;
  std::vector<PatternBond> bonds;
  std::optional<RingConstraint> ring;
};

using Match = std::vector<int>;  // pattern atom index -> molecule atom index

// all matches, deduplicated by mapped atom set and ordered lexicographically
// by the sorted set. errors when the pattern is empty or disconnected.
std::vector<Match> match_pattern(const Molecule& m, const Pattern& pat);

}  // namespace probekit
