#include "probekit/molecule.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>

#include "probekit/error.hpp"

namespace probekit {

std::vector<std::vector<int>> Molecule::adjacency() const {
  std::vector<std::vector<int>> adj(atoms.size());
  for (const Bond& b : bonds) {
    adj[static_cast<std::size_t>(b.a)].push_back(b.b);
    adj[static_cast<std::size_t>(b.b)].push_back(b.a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

const Bond* Molecule::find_bond(int a, int b) const {
  for (const Bond& bd : bonds)
    if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return &bd;
  return nullptr;
}

int bond_sigma(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

bool known_element(const std::string& symbol) {
  static const std::set<std::string> known = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "H"};
  return known.count(symbol) > 0;
}

std::vector<int> allowed_valences(const std::string& element, int charge) {
  std::vector<int> base;
  if (element == "B") base = {3};
  else if (element == "C") base = {4};
  else if (element == "N") base = {3, 5};  // 5 covers the neutral N(=O)=O nitro form
  else if (element == "O") base = {2};
  else if (element == "P") base = {3, 5};
  else if (element == "S") base = {2, 4, 6};
  else if (element == "F" || element == "Cl" || element == "Br" || element == "I") base = {1};
  else if (element == "H") base = {1};
  else return {};

  if (charge == 0) return base;
  // the model only shifts valence with charge for N and O ([N+] 4, [O-] 1)
  if (element != "N" && element != "O") return {};
  std::vector<int> shifted;
  for (int v : base)
    if (v + charge > 0) shifted.push_back(v + charge);
  return shifted;
}

namespace {

std::vector<int> sigma_sums(const Molecule& m) {
  std::vector<int> sigma(m.atoms.size(), 0);
  for (const Bond& b : m.bonds) {
    sigma[static_cast<std::size_t>(b.a)] += bond_sigma(b.order);
    sigma[static_cast<std::size_t>(b.b)] += bond_sigma(b.order);
  }
  return sigma;
}

bool pi_capable(const std::string& element) {
  // aromatic O, S, B contribute lone pairs to the ring, never a double bond
  return element == "C" || element == "N" || element == "P";
}

bool valence_ok(const Atom& a, int sigma) {
  const std::vector<int> allowed = allowed_valences(a.element, a.formal_charge);
  const int total = sigma + a.explicit_h + a.implicit_h;
  for (int v : allowed) {
    if (total == v) return true;
    if (a.aromatic && total + 1 == v) return true;  // the Kekule double bond may land here
  }
  return false;
}

std::string valence_message(const Molecule& m, int i, int sigma) {
  const Atom& a = m.atoms[static_cast<std::size_t>(i)];
  return "valence violation on atom " + std::to_string(i) + " (" + a.element +
         (a.formal_charge ? (a.formal_charge > 0 ? "+" : "-") : "") +
         "): bond order sum " + std::to_string(sigma) + " with " + std::to_string(a.explicit_h + a.implicit_h) +
         " hydrogens fits no allowed valence";
}

[[noreturn]] void valence_error(const Molecule& m, int i, int sigma) { fail(valence_message(m, i, sigma)); }

}  // namespace

int infer_implicit_h(const std::string& element, bool aromatic, int charge, int sigma, int explicit_h) {
  const std::vector<int> allowed = allowed_valences(element, charge);
  if (allowed.empty()) return -1;
  if (aromatic) {
    // lowest valence only: aromatic atoms are never hypervalent here
    const int v = allowed.front();
    const int pi = pi_capable(element) && sigma + explicit_h + 1 <= v ? 1 : 0;
    const int h = v - sigma - explicit_h - pi;
    return h < 0 ? -1 : h;
  }
  const int target = sigma + explicit_h;
  for (int v : allowed)
    if (v >= target) return v - target;
  return -1;
}

int try_assign_implicit_h(Molecule& m, std::string* msg) {
  const std::vector<int> sigma = sigma_sums(m);
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    Atom& a = m.atoms[i];
    if (!known_element(a.element)) {
      if (msg) *msg = "unknown element '" + a.element + "' on atom " + std::to_string(i);
      return static_cast<int>(i);
    }
    if (allowed_valences(a.element, a.formal_charge).empty()) {
      if (msg) *msg = "unsupported element/charge combination on atom " + std::to_string(i) + " (" + a.element + ")";
      return static_cast<int>(i);
    }
    if (!a.h_fixed) {
      const int h = infer_implicit_h(a.element, a.aromatic, a.formal_charge, sigma[i], a.explicit_h);
      if (h < 0) {
        if (msg) *msg = valence_message(m, static_cast<int>(i), sigma[i]);
        return static_cast<int>(i);
      }
      a.implicit_h = h;
    }
    if (!valence_ok(a, sigma[i])) {
      if (msg) *msg = valence_message(m, static_cast<int>(i), sigma[i]);
      return static_cast<int>(i);
    }
  }
  return -1;
}

void assign_implicit_h(Molecule& m) {
  std::string msg;
  if (try_assign_implicit_h(m, &msg) >= 0) fail(msg);
}

bool is_connected(const Molecule& m) {
  if (m.atoms.empty()) return false;
  const auto adj = m.adjacency();
  std::vector<char> seen(m.atoms.size(), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int w : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        queue.push_back(w);
      }
  }
  return reached == m.atoms.size();
}

void check_molecule(const Molecule& m) {
  if (m.atoms.empty()) fail("molecule has no atoms");
  const int n = static_cast<int>(m.atoms.size());
  std::set<std::pair<int, int>> seen;
  for (const Bond& b : m.bonds) {
    if (b.a < 0 || b.a >= n || b.b < 0 || b.b >= n) fail("bond references atom out of range");
    if (b.a == b.b) fail("self-loop bond on atom " + std::to_string(b.a));
    const auto key = std::minmax(b.a, b.b);
    if (!seen.insert(key).second)
      fail("duplicate bond between atoms " + std::to_string(key.first) + " and " + std::to_string(key.second));
    if (b.order == BondOrder::Aromatic &&
        (!m.atoms[static_cast<std::size_t>(b.a)].aromatic || !m.atoms[static_cast<std::size_t>(b.b)].aromatic))
      fail("aromatic bond between non-aromatic atoms " + std::to_string(b.a) + " and " + std::to_string(b.b));
  }
  if (!is_connected(m)) fail("molecule is not connected");
  const std::vector<int> sigma = sigma_sums(m);
  for (int i = 0; i < n; ++i)
    if (!valence_ok(m.atoms[static_cast<std::size_t>(i)], sigma[static_cast<std::size_t>(i)]))
      valence_error(m, i, sigma[static_cast<std::size_t>(i)]);
}

namespace {

// edge-set bitmask over bond indices, for GF(2) independence tests
using EdgeMask = std::vector<std::uint64_t>;

EdgeMask make_mask(std::size_t nbits) { return EdgeMask((nbits + 63) / 64, 0); }
void set_bit(EdgeMask& m, std::size_t i) { m[i / 64] |= std::uint64_t(1) << (i % 64); }
bool any_bit(const EdgeMask& m) {
  for (auto w : m)
    if (w) return true;
  return false;
}
void xor_into(EdgeMask& dst, const EdgeMask& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
}
int lowest_bit(const EdgeMask& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) return static_cast<int>(i * 64 + static_cast<std::size_t>(__builtin_ctzll(m[i])));
  return -1;
}

struct Candidate {
  std::vector<int> cycle;      // ordered atom sequence
  std::vector<int> edge_ids;   // sorted, for dedup
  EdgeMask mask;
};

std::vector<int> canonical_rotation(const std::vector<int>& cycle) {
  // start at the smallest atom and walk toward its smaller neighbor
  const std::size_t k = cycle.size();
  std::size_t start = 0;
  for (std::size_t i = 1; i < k; ++i)
    if (cycle[i] < cycle[start]) start = i;
  const int next_fwd = cycle[(start + 1) % k];
  const int next_bwd = cycle[(start + k - 1) % k];
  std::vector<int> out(k);
  if (next_fwd <= next_bwd) {
    for (std::size_t i = 0; i < k; ++i) out[i] = cycle[(start + i) % k];
  } else {
    for (std::size_t i = 0; i < k; ++i) out[i] = cycle[(start + k - i) % k];
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> minimum_cycle_basis(const Molecule& m) {
  const int n = static_cast<int>(m.atoms.size());
  const std::size_t ne = m.bonds.size();
  const int rank = static_cast<int>(ne) - n + 1;  // connected molecules only
  if (n == 0 || rank <= 0) return {};

  std::map<std::pair<int, int>, int> edge_id;
  for (std::size_t e = 0; e < ne; ++e)
    edge_id[std::minmax(m.bonds[e].a, m.bonds[e].b)] = static_cast<int>(e);
  const auto adj = m.adjacency();

  // Horton candidates: shortest paths from every vertex v combined with every
  // non-tree edge (x,y) give cycles v..x, y..v; keep the simple ones
  std::vector<Candidate> cands;
  std::set<std::vector<int>> dedup;
  for (int v = 0; v < n; ++v) {
    std::vector<int> dist(static_cast<std::size_t>(n), -1), parent(static_cast<std::size_t>(n), -1);
    std::deque<int> queue{v};
    dist[static_cast<std::size_t>(v)] = 0;
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      for (int y : adj[static_cast<std::size_t>(x)])
        if (dist[static_cast<std::size_t>(y)] < 0) {
          dist[static_cast<std::size_t>(y)] = dist[static_cast<std::size_t>(x)] + 1;
          parent[static_cast<std::size_t>(y)] = x;
          queue.push_back(y);
        }
    }
    auto path_from = [&](int x) {
      std::vector<int> p;
      for (int cur = x; cur != -1; cur = parent[static_cast<std::size_t>(cur)]) p.push_back(cur);
      std::reverse(p.begin(), p.end());  // v ... x
      return p;
    };
    for (const Bond& b : m.bonds) {
      const int x = b.a, y = b.b;
      if (dist[static_cast<std::size_t>(x)] < 0 || dist[static_cast<std::size_t>(y)] < 0) continue;
      const std::vector<int> px = path_from(x), py = path_from(y);
      // paths must share only v, otherwise the walk is not a simple cycle
      std::set<int> seen(px.begin(), px.end());
      bool ok = true;
      for (std::size_t i = 1; i < py.size(); ++i)
        if (seen.count(py[i])) { ok = false; break; }
      if (!ok || px.size() + py.size() < 3) continue;

      std::vector<int> cycle = px;                      // v ... x
      for (std::size_t i = py.size(); i-- > 1;) cycle.push_back(py[i]);  // y ... (v excluded)
      if (cycle.size() < 3) continue;

      Candidate c;
      c.cycle = canonical_rotation(cycle);
      c.mask = make_mask(ne);
      for (std::size_t i = 0; i < cycle.size(); ++i) {
        const auto it = edge_id.find(std::minmax(cycle[i], cycle[(i + 1) % cycle.size()]));
        if (it == edge_id.end()) { ok = false; break; }
        c.edge_ids.push_back(it->second);
        set_bit(c.mask, static_cast<std::size_t>(it->second));
      }
      if (!ok) continue;
      std::sort(c.edge_ids.begin(), c.edge_ids.end());
      if (!dedup.insert(c.edge_ids).second) continue;
      cands.push_back(std::move(c));
    }
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cycle.size() != b.cycle.size()) return a.cycle.size() < b.cycle.size();
    return a.cycle < b.cycle;
  });

  // greedy GF(2) independence in length order
  std::vector<std::vector<int>> basis;
  std::map<int, EdgeMask> pivots;  // pivot bit -> reduced mask
  for (const Candidate& c : cands) {
    EdgeMask reduced = c.mask;
    while (any_bit(reduced)) {
      const int p = lowest_bit(reduced);
      const auto it = pivots.find(p);
      if (it == pivots.end()) break;
      xor_into(reduced, it->second);
    }
    if (!any_bit(reduced)) continue;
    pivots[lowest_bit(reduced)] = reduced;
    basis.push_back(c.cycle);
    if (static_cast<int>(basis.size()) == rank) break;
  }
  if (static_cast<int>(basis.size()) != rank)
    fail("cycle basis construction failed: found " + std::to_string(basis.size()) +
         " of " + std::to_string(rank) + " independent cycles");
  return basis;
}

}  // namespace probekit
