#pragma once

// SMILES subset: organic-subset atoms plus brackets, branches, ring closures
// (1-9 and %nn), bond symbols - = # :. Stereo markers are discarded, '.'
// fragments are rejected. Every parse error carries its byte offset.

#include <string>
#include <vector>

#include "probekit/molecule.hpp"

namespace probekit {

Molecule parse_smiles(const std::string& s);

// output re-parses to a graph isomorphic to the input; no canonical form
std::string write_smiles(const Molecule& m);

// bijection preserving element, charge, aromatic flag, total H and bond order
bool graphs_isomorphic(const Molecule& a, const Molecule& b);

struct SmilesRecord {
  std::string id;
  std::string smiles;
  std::size_t line_no = 0;
};

// one record per line, `<smiles>` or `<id>\t<smiles>`; '#' lines are
// comments; missing ids become the 1-based line number
std::vector<SmilesRecord> read_smiles_file(const std::string& path);

void write_smiles_file(const std::string& path, const std::vector<SmilesRecord>& records);

}  // namespace probekit
