#pragma once

// Attributed molecular graphs with a small valence model. The parser and the
// property code both lean on the helpers here: implicit hydrogen assignment,
// valence validation, and a minimum cycle basis for ring perception.

#include <string>
#include <vector>

namespace probekit {

enum class BondOrder { Single, Double, Triple, Aromatic };

struct Atom {
  std::string element;     // one of B,C,N,O,P,S,F,Cl,Br,I,H
  int formal_charge = 0;
  bool aromatic = false;
  int explicit_h = 0;      // from bracket atoms (or folded [H] neighbors)
  int implicit_h = 0;      // computed by assign_implicit_h
  bool h_fixed = false;    // bracket atoms: explicit_h is total, no implicit added
};

struct Bond {
  int a = 0, b = 0;
  BondOrder order = BondOrder::Single;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  int total_h(int i) const { return atoms[static_cast<std::size_t>(i)].explicit_h + atoms[static_cast<std::size_t>(i)].implicit_h; }
  std::vector<std::vector<int>> adjacency() const;       // neighbor atom indices, sorted
  const Bond* find_bond(int a, int b) const;             // nullptr when absent
};

// sigma contribution of a bond to valence accounting: single/aromatic 1,
// double 2, triple 3 (an aromatic atom may carry one extra pi bond on top)
int bond_sigma(BondOrder o);

bool known_element(const std::string& symbol);

// allowed total valences for (element, charge); empty when the combination is
// outside the model. charge shifts the table for N and O only.
std::vector<int> allowed_valences(const std::string& element, int charge);

// hydrogen count a bare (bracket-free) token would receive given its bond
// environment; -1 when no allowed valence fits. write_smiles uses the same
// function, which is what makes bare-token round-trips safe.
int infer_implicit_h(const std::string& element, bool aromatic, int charge, int sigma, int explicit_h);

// fills implicit_h for atoms without h_fixed, then validates every atom
// against the valence table. throws Error naming the atom index on failure.
void assign_implicit_h(Molecule& m);

// non-throwing variant: returns the first failing atom index (message in
// *msg) or -1 on success. the parser maps the index back to a byte offset.
int try_assign_implicit_h(Molecule& m, std::string* msg);

// re-checks the full molecule invariant set: simple graph, connected,
// aromatic bonds between aromatic atoms, valences consistent.
void check_molecule(const Molecule& m);

bool is_connected(const Molecule& m);

// minimum cycle basis (Horton): |bonds| - |atoms| + 1 rings for a connected
// graph, each returned as an ordered atom cycle
std::vector<std::vector<int>> minimum_cycle_basis(const Molecule& m);

}  // namespace probekit
