#include "probekit/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "probekit/error.hpp"

namespace probekit {

namespace {

[[noreturn]] void perr(std::size_t pos, const std::string& msg) {
  fail("smiles parse error at offset " + std::to_string(pos) + ": " + msg);
}

bool aromatic_token(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

struct RingOpen {
  int atom = -1;
  std::optional<BondOrder> order;
  std::size_t pos = 0;  // offset of the opening digit
};

struct BranchOpen {
  int atom = -1;
  std::size_t pos = 0;
};

// collapse explicit [H] atoms into their heavy neighbor's hydrogen count,
// so "[H]C([H])([H])[H]" and "C" parse to the same graph. an H that cannot
// fold (charged, H-H bonded, multivalent) stays a real atom.
void fold_hydrogens(Molecule& m) {
  const int n = static_cast<int>(m.atoms.size());
  std::vector<int> bond_count(static_cast<std::size_t>(n), 0);
  for (const Bond& b : m.bonds) {
    ++bond_count[static_cast<std::size_t>(b.a)];
    ++bond_count[static_cast<std::size_t>(b.b)];
  }
  std::vector<char> fold(static_cast<std::size_t>(n), 0);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    const Atom& a = m.atoms[static_cast<std::size_t>(i)];
    if (a.element != "H" || a.formal_charge != 0 || a.explicit_h != 0) continue;
    if (bond_count[static_cast<std::size_t>(i)] != 1) continue;
    for (const Bond& b : m.bonds) {
      if (b.a != i && b.b != i) continue;
      const int other = b.a == i ? b.b : b.a;
      if (b.order == BondOrder::Single && m.atoms[static_cast<std::size_t>(other)].element != "H") {
        m.atoms[static_cast<std::size_t>(other)].explicit_h += 1;
        fold[static_cast<std::size_t>(i)] = 1;
        any = true;
      }
      break;
    }
  }
  if (!any) return;

  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  Molecule out;
  for (int i = 0; i < n; ++i)
    if (!fold[static_cast<std::size_t>(i)]) {
      remap[static_cast<std::size_t>(i)] = static_cast<int>(out.atoms.size());
      out.atoms.push_back(m.atoms[static_cast<std::size_t>(i)]);
    }
  for (const Bond& b : m.bonds) {
    if (fold[static_cast<std::size_t>(b.a)] || fold[static_cast<std::size_t>(b.b)]) continue;
    out.bonds.push_back({remap[static_cast<std::size_t>(b.a)], remap[static_cast<std::size_t>(b.b)], b.order});
  }
  m = std::move(out);
}

// Kekule-form aromatic recognition: an even-length basis ring whose bonds
// strictly alternate single/double is converted to aromatic atoms and bonds,
// so "C1=CC=CC=C1" parses identically to "c1ccccc1". the rule is purely
// syntactic, no aromaticity theory is applied.
void recognize_kekule_rings(Molecule& m) {
  if (m.bonds.size() < m.atoms.size()) return;  // acyclic, nothing to do
  std::map<std::pair<int, int>, std::size_t> bond_at;
  for (std::size_t e = 0; e < m.bonds.size(); ++e)
    bond_at[std::minmax(m.bonds[e].a, m.bonds[e].b)] = e;

  std::set<int> mark_atoms;
  std::set<std::size_t> mark_bonds;
  for (const std::vector<int>& ring : minimum_cycle_basis(m)) {
    const std::size_t k = ring.size();
    if (k % 2 != 0) continue;
    std::vector<std::size_t> eids(k);
    bool alternating = true;
    for (std::size_t i = 0; i < k && alternating; ++i) {
      eids[i] = bond_at.at(std::minmax(ring[i], ring[(i + 1) % k]));
      const BondOrder o = m.bonds[eids[i]].order;
      if (o != BondOrder::Single && o != BondOrder::Double) alternating = false;
      if (i > 0 && m.bonds[eids[i]].order == m.bonds[eids[i - 1]].order) alternating = false;
    }
    if (alternating && m.bonds[eids[0]].order == m.bonds[eids[k - 1]].order) alternating = false;
    if (!alternating) continue;
    mark_atoms.insert(ring.begin(), ring.end());
    mark_bonds.insert(eids.begin(), eids.end());
  }
  for (int i : mark_atoms) m.atoms[static_cast<std::size_t>(i)].aromatic = true;
  for (std::size_t e : mark_bonds) m.bonds[e].order = BondOrder::Aromatic;
}

}  // namespace

Molecule parse_smiles(const std::string& s) {
  if (s.empty()) perr(0, "empty SMILES");

  Molecule m;
  std::vector<std::size_t> atom_pos;  // token offset per atom, for errors
  std::vector<BranchOpen> stack;
  int prev = -1;
  std::optional<BondOrder> pending;
  std::size_t pending_pos = 0;
  std::map<int, RingOpen> ring;

  auto add_atom = [&](Atom a, std::size_t pos) {
    const int idx = static_cast<int>(m.atoms.size());
    if (prev < 0 && pending) perr(pending_pos, "bond symbol before any atom");
    m.atoms.push_back(std::move(a));
    atom_pos.push_back(pos);
    if (prev >= 0) {
      const bool both_arom = m.atoms[static_cast<std::size_t>(prev)].aromatic &&
                             m.atoms[static_cast<std::size_t>(idx)].aromatic;
      const BondOrder o = pending ? *pending : (both_arom ? BondOrder::Aromatic : BondOrder::Single);
      m.bonds.push_back({prev, idx, o});
    }
    pending.reset();
    prev = idx;
  };

  auto set_bond = [&](BondOrder o, std::size_t pos) {
    if (pending) perr(pos, "two bond symbols in a row");
    pending = o;
    pending_pos = pos;
  };

  auto ring_closure = [&](int num, std::size_t pos) {
    if (prev < 0) perr(pos, "ring closure before any atom");
    const auto it = ring.find(num);
    if (it == ring.end()) {
      ring[num] = RingOpen{prev, pending, pos};
      pending.reset();
      return;
    }
    const RingOpen open = it->second;
    ring.erase(it);
    if (open.atom == prev) perr(pos, "ring closure bonds an atom to itself");
    if (open.order && pending && *open.order != *pending) perr(pos, "conflicting ring bond orders");
    BondOrder o;
    if (pending) o = *pending;
    else if (open.order) o = *open.order;
    else {
      const bool both_arom = m.atoms[static_cast<std::size_t>(open.atom)].aromatic &&
                             m.atoms[static_cast<std::size_t>(prev)].aromatic;
      o = both_arom ? BondOrder::Aromatic : BondOrder::Single;
    }
    if (m.find_bond(open.atom, prev)) perr(pos, "duplicate bond via ring closure");
    m.bonds.push_back({open.atom, prev, o});
    pending.reset();
  };

  // bracket atom: [<isotope?><symbol><chirality?><Hcount?><charge?>]
  auto parse_bracket = [&](std::size_t start) -> std::size_t {
    std::size_t j = start + 1;
    const std::size_t n = s.size();
    while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;  // isotope, discarded
    if (j >= n) perr(start, "unterminated bracket atom");

    Atom a;
    a.h_fixed = true;
    if (std::isupper(static_cast<unsigned char>(s[j]))) {
      std::string sym(1, s[j]);
      if (j + 1 < n && std::islower(static_cast<unsigned char>(s[j + 1])))
        sym += s[j + 1];
      if (!known_element(sym)) perr(j, "unknown atom symbol '" + sym + "'");
      a.element = sym;
      j += sym.size();
    } else if (aromatic_token(s[j])) {
      a.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(s[j]))));
      a.aromatic = true;
      ++j;
    } else {
      perr(j, std::string("unknown atom symbol '") + (j < n ? std::string(1, s[j]) : "") + "'");
    }

    while (j < n && s[j] == '@') ++j;  // chirality, discarded
    if (j < n && s[j] == 'H') {
      ++j;
      int count = 1;
      if (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) {
        count = 0;
        while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) count = count * 10 + (s[j++] - '0');
      }
      a.explicit_h = count;
    }
    if (j < n && (s[j] == '+' || s[j] == '-')) {
      const char sign_char = s[j];
      const int sign = sign_char == '+' ? 1 : -1;
      ++j;
      int magnitude = 1;
      if (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) {
        magnitude = 0;
        while (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) magnitude = magnitude * 10 + (s[j++] - '0');
      } else {
        while (j < n && s[j] == sign_char) {
          ++magnitude;
          ++j;
        }
      }
      a.formal_charge = sign * magnitude;
    }
    if (j >= n || s[j] != ']') perr(j < n ? j : n - 1, "expected ']' in bracket atom");
    add_atom(std::move(a), start);
    return j + 1;
  };

  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == 'C' || c == 'B') {
      std::string sym(1, c);
      if (c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') sym = "Cl";
      if (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r') sym = "Br";
      Atom a;
      a.element = sym;
      add_atom(std::move(a), i);
      i += sym.size();
    } else if (c == 'N' || c == 'O' || c == 'P' || c == 'S' || c == 'F' || c == 'I') {
      Atom a;
      a.element = std::string(1, c);
      add_atom(std::move(a), i);
      ++i;
    } else if (aromatic_token(c)) {
      Atom a;
      a.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      a.aromatic = true;
      add_atom(std::move(a), i);
      ++i;
    } else if (c == '[') {
      i = parse_bracket(i);
    } else if (c == '(') {
      if (prev < 0) perr(i, "branch before any atom");
      if (pending) perr(pending_pos, "dangling bond symbol before '('");
      stack.push_back({prev, i});
      ++i;
    } else if (c == ')') {
      if (pending) perr(pending_pos, "dangling bond symbol before ')'");
      if (stack.empty()) perr(i, "unmatched ')'");
      prev = stack.back().atom;
      stack.pop_back();
      ++i;
    } else if (c == '-') {
      set_bond(BondOrder::Single, i);
      ++i;
    } else if (c == '=') {
      set_bond(BondOrder::Double, i);
      ++i;
    } else if (c == '#') {
      set_bond(BondOrder::Triple, i);
      ++i;
    } else if (c == ':') {
      set_bond(BondOrder::Aromatic, i);
      ++i;
    } else if (c == '/' || c == '\\') {
      set_bond(BondOrder::Single, i);  // stereo marker, kept as plain single
      ++i;
    } else if (c >= '1' && c <= '9') {
      ring_closure(c - '0', i);
      ++i;
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        perr(i, "expected two digits after '%'");
      ring_closure((s[i + 1] - '0') * 10 + (s[i + 2] - '0'), i);
      i += 3;
    } else if (c == '.') {
      perr(i, "multi-fragment input is not supported");
    } else {
      perr(i, std::string("unexpected character '") + c + "'");
    }
  }

  if (pending) perr(pending_pos, "dangling bond symbol at end of input");
  if (!stack.empty()) perr(stack.front().pos, "unclosed branch");
  if (!ring.empty()) {
    const RingOpen* first = &ring.begin()->second;
    for (const auto& [num, open] : ring)
      if (open.pos < first->pos) first = &open;
    perr(first->pos, "unclosed ring bond");
  }
  if (m.atoms.empty()) perr(0, "no atoms in input");

  fold_hydrogens(m);
  recognize_kekule_rings(m);

  std::string msg;
  const int bad = try_assign_implicit_h(m, &msg);
  if (bad >= 0) {
    // atom_pos survives fold_hydrogens poorly, so only use it when indices
    // still line up; the message itself always names the atom
    const std::size_t pos = static_cast<std::size_t>(bad) < atom_pos.size() &&
                                    m.atoms.size() == atom_pos.size()
                                ? atom_pos[static_cast<std::size_t>(bad)]
                                : 0;
    perr(pos, msg);
  }
  return m;
}

namespace {

// what hydrogen count would a bare token for atom i re-parse to?
int bare_reparse_h(const Molecule& m, int i) {
  const Atom& a = m.atoms[static_cast<std::size_t>(i)];
  int sigma = 0;
  for (const Bond& b : m.bonds)
    if (b.a == i || b.b == i) sigma += bond_sigma(b.order);
  return infer_implicit_h(a.element, a.aromatic, 0, sigma, 0);
}

std::string atom_token(const Molecule& m, int i) {
  const Atom& a = m.atoms[static_cast<std::size_t>(i)];
  std::string sym = a.element;
  if (a.aromatic) {
    if (a.element.size() != 1 || !aromatic_token(static_cast<char>(std::tolower(static_cast<unsigned char>(a.element[0])))))
      fail("write_smiles: element " + a.element + " has no aromatic token");
    sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
  }

  bool bracket = a.formal_charge != 0 || a.element == "H";
  if (!bracket && bare_reparse_h(m, i) != m.total_h(i)) bracket = true;
  if (!bracket) return sym;

  std::string out = "[" + sym;
  const int h = m.total_h(i);
  if (h == 1) out += "H";
  else if (h > 1) out += "H" + std::to_string(h);
  if (a.formal_charge > 0) out += a.formal_charge == 1 ? "+" : "+" + std::to_string(a.formal_charge);
  if (a.formal_charge < 0) out += a.formal_charge == -1 ? "-" : "-" + std::to_string(-a.formal_charge);
  return out + "]";
}

// bond symbol to emit before an atom or ring digit; empty when the default
// bond (single, or aromatic between aromatic atoms) already means the same
std::string bond_token(const Molecule& m, const Bond& b) {
  const bool both_arom = m.atoms[static_cast<std::size_t>(b.a)].aromatic &&
                         m.atoms[static_cast<std::size_t>(b.b)].aromatic;
  switch (b.order) {
    case BondOrder::Single: return both_arom ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return both_arom ? "" : ":";
  }
  return "";
}

std::string ring_digit(int num) {
  if (num <= 9) return std::to_string(num);
  return "%" + std::string(num < 10 ? "0" : "") + std::to_string(num);
}

}  // namespace

std::string write_smiles(const Molecule& m) {
  if (m.atoms.empty()) fail("write_smiles: empty molecule");
  if (!is_connected(m)) fail("write_smiles: molecule is not connected");
  const int n = static_cast<int>(m.atoms.size());
  const auto adj = m.adjacency();

  // pass 1: depth-first spanning tree from atom 0; every non-tree edge
  // becomes a ring closure number carried by both endpoints
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<std::pair<int, const Bond*>>> closures(static_cast<std::size_t>(n));
  std::set<std::pair<int, int>> ring_edges;
  int next_ring = 1;
  {
    std::vector<std::pair<int, int>> dstack{{0, -1}};
    while (!dstack.empty()) {
      const auto [v, parent] = dstack.back();
      dstack.pop_back();
      if (visited[static_cast<std::size_t>(v)]) continue;
      visited[static_cast<std::size_t>(v)] = 1;
      // children pushed in reverse so lower indices are visited first
      for (auto it = adj[static_cast<std::size_t>(v)].rbegin(); it != adj[static_cast<std::size_t>(v)].rend(); ++it) {
        const int w = *it;
        if (w == parent) continue;
        if (visited[static_cast<std::size_t>(w)]) {
          const auto key = std::minmax(v, w);
          if (ring_edges.insert(key).second) {
            if (next_ring > 99) fail("write_smiles: more than 99 ring closures");
            const Bond* b = m.find_bond(v, w);
            closures[static_cast<std::size_t>(w)].push_back({next_ring, b});  // opener (visited earlier)
            closures[static_cast<std::size_t>(v)].push_back({next_ring, b});
            ++next_ring;
          }
        } else {
          dstack.push_back({w, v});
        }
      }
    }
  }
  for (int v = 0; v < n; ++v)
    if (!visited[static_cast<std::size_t>(v)]) fail("write_smiles: molecule is not connected");

  // pass 2: the same traversal, emitting text recursively
  std::string out;
  std::vector<char> emitted(static_cast<std::size_t>(n), 0);
  std::set<int> ring_opened;

  auto emit = [&](auto&& self, int v, int parent) -> void {
    emitted[static_cast<std::size_t>(v)] = 1;
    out += atom_token(m, v);
    for (const auto& [num, bond] : closures[static_cast<std::size_t>(v)]) {
      if (ring_opened.insert(num).second) out += bond_token(m, *bond);  // symbol on the opening end only
      out += ring_digit(num);
    }
    std::vector<int> children;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (w == parent || emitted[static_cast<std::size_t>(w)]) continue;
      if (ring_edges.count(std::minmax(v, w))) continue;  // ring closure, not a tree edge
      children.push_back(w);
    }
    for (std::size_t k = 0; k < children.size(); ++k) {
      const int w = children[k];
      if (emitted[static_cast<std::size_t>(w)]) continue;  // reached through a sibling branch
      const std::string bt = bond_token(m, *m.find_bond(v, w));
      if (k + 1 < children.size()) {
        out += "(" + bt;
        self(self, w, v);
        out += ")";
      } else {
        out += bt;
        self(self, w, v);
      }
    }
  };
  emit(emit, 0, -1);
  return out;
}

bool graphs_isomorphic(const Molecule& a, const Molecule& b) {
  const int n = static_cast<int>(a.atoms.size());
  if (n != static_cast<int>(b.atoms.size()) || a.bonds.size() != b.bonds.size()) return false;
  if (n == 0) return true;

  auto label = [](const Molecule& m, int i) {
    const Atom& at = m.atoms[static_cast<std::size_t>(i)];
    return std::make_tuple(at.element, at.formal_charge, at.aromatic, m.total_h(i));
  };
  const auto adj_a = a.adjacency(), adj_b = b.adjacency();

  {
    std::multiset<std::tuple<std::string, int, bool, int, std::size_t>> la, lb;
    for (int i = 0; i < n; ++i) {
      la.insert(std::tuple_cat(label(a, i), std::make_tuple(adj_a[static_cast<std::size_t>(i)].size())));
      lb.insert(std::tuple_cat(label(b, i), std::make_tuple(adj_b[static_cast<std::size_t>(i)].size())));
    }
    if (la != lb) return false;
  }

  // order a's atoms so each one (after the first) touches the mapped region
  std::vector<int> order;
  {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> queue{0};
    seen[0] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      order.push_back(queue[q]);
      for (int w : adj_a[static_cast<std::size_t>(queue[q])])
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          queue.push_back(w);
        }
    }
    if (order.size() != static_cast<std::size_t>(n)) return false;  // a not connected
  }

  std::vector<int> map_ab(static_cast<std::size_t>(n), -1);
  std::vector<char> used_b(static_cast<std::size_t>(n), 0);

  auto consistent = [&](int ai, int bi) {
    if (label(a, ai) != label(b, bi)) return false;
    if (adj_a[static_cast<std::size_t>(ai)].size() != adj_b[static_cast<std::size_t>(bi)].size()) return false;
    // edges between bi and the mapped image must mirror edges of ai exactly
    for (int aj = 0; aj < n; ++aj) {
      const int bj = map_ab[static_cast<std::size_t>(aj)];
      if (bj < 0) continue;
      const Bond* ea = a.find_bond(ai, aj);
      const Bond* eb = b.find_bond(bi, bj);
      if ((ea == nullptr) != (eb == nullptr)) return false;
      if (ea && ea->order != eb->order) return false;
    }
    return true;
  };

  auto backtrack = [&](auto&& self, std::size_t k) -> bool {
    if (k == order.size()) return true;
    const int ai = order[k];
    for (int bi = 0; bi < n; ++bi) {
      if (used_b[static_cast<std::size_t>(bi)] || !consistent(ai, bi)) continue;
      map_ab[static_cast<std::size_t>(ai)] = bi;
      used_b[static_cast<std::size_t>(bi)] = 1;
      if (self(self, k + 1)) return true;
      map_ab[static_cast<std::size_t>(ai)] = -1;
      used_b[static_cast<std::size_t>(bi)] = 0;
    }
    return false;
  };
  return backtrack(backtrack, 0);
}

std::vector<SmilesRecord> read_smiles_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open SMILES file: " + path);
  std::vector<SmilesRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    SmilesRecord rec;
    rec.line_no = line_no;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      rec.id = std::to_string(line_no);
      rec.smiles = line;
    } else {
      rec.id = line.substr(0, tab);
      rec.smiles = line.substr(tab + 1);
      if (rec.id.empty()) fail(path + ":" + std::to_string(line_no) + ": empty id before tab");
    }
    while (!rec.smiles.empty() && (rec.smiles.back() == ' ' || rec.smiles.back() == '\t')) rec.smiles.pop_back();
    if (rec.smiles.empty()) fail(path + ":" + std::to_string(line_no) + ": empty SMILES");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_smiles_file(const std::string& path, const std::vector<SmilesRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write SMILES file: " + path);
  for (const SmilesRecord& r : records) out << r.id << "\t" << r.smiles << "\n";
  if (!out) fail("write failed: " + path);
}

}  // namespace probekit
