#include "probekit/patterns.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "probekit/error.hpp"

namespace probekit {

namespace {

bool bond_pred_ok(BondPred p, BondOrder o) {
  switch (p) {
    case BondPred::Single: return o == BondOrder::Single;
    case BondPred::Double: return o == BondOrder::Double;
    case BondPred::Triple: return o == BondOrder::Triple;
    case BondPred::Aromatic: return o == BondOrder::Aromatic;
    case BondPred::Any: return true;
  }
  return false;
}

void validate_pattern(const Pattern& pat) {
  const int k = static_cast<int>(pat.atoms.size());
  if (k == 0) fail("pattern '" + pat.name + "' has no atoms");
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(k));
  for (const PatternBond& b : pat.bonds) {
    if (b.i < 0 || b.i >= k || b.j < 0 || b.j >= k || b.i == b.j)
      fail("pattern '" + pat.name + "' has an invalid bond");
    adj[static_cast<std::size_t>(b.i)].push_back(b.j);
    adj[static_cast<std::size_t>(b.j)].push_back(b.i);
  }
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
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
  if (reached != k) fail("pattern '" + pat.name + "' is not connected");
  if (pat.ring) {
    for (int a : pat.ring->atoms)
      if (a < 0 || a >= k) fail("pattern '" + pat.name + "' ring constraint references a missing atom");
    if (pat.ring->size < 3) fail("pattern '" + pat.name + "' ring constraint size must be >= 3");
  }
}

}  // namespace

std::vector<Match> match_pattern(const Molecule& m, const Pattern& pat) {
  validate_pattern(pat);
  const int k = static_cast<int>(pat.atoms.size());
  const int n = static_cast<int>(m.atoms.size());
  if (k > n) return {};

  const auto adj = m.adjacency();
  std::vector<int> heavy_degree(static_cast<std::size_t>(n), 0);
  std::vector<char> all_single(static_cast<std::size_t>(n), 1);
  for (const Bond& b : m.bonds) {
    if (m.atoms[static_cast<std::size_t>(b.b)].element != "H") ++heavy_degree[static_cast<std::size_t>(b.a)];
    if (m.atoms[static_cast<std::size_t>(b.a)].element != "H") ++heavy_degree[static_cast<std::size_t>(b.b)];
    if (b.order != BondOrder::Single) {
      all_single[static_cast<std::size_t>(b.a)] = 0;
      all_single[static_cast<std::size_t>(b.b)] = 0;
    }
  }

  auto atom_ok = [&](const AtomPred& p, int idx) {
    const Atom& a = m.atoms[static_cast<std::size_t>(idx)];
    if (!p.element.empty() && a.element != p.element) return false;
    if (p.aromatic && a.aromatic != *p.aromatic) return false;
    if (p.charge && a.formal_charge != *p.charge) return false;
    if (heavy_degree[static_cast<std::size_t>(idx)] < p.min_degree) return false;
    if (m.total_h(idx) < p.min_h) return false;
    if (p.only_single_bonds && !all_single[static_cast<std::size_t>(idx)]) return false;
    return true;
  };

  // search order: BFS over the pattern so every atom after the first is
  // anchored to an already-mapped neighbor
  std::vector<std::vector<std::pair<int, BondPred>>> padj(static_cast<std::size_t>(k));
  for (const PatternBond& b : pat.bonds) {
    padj[static_cast<std::size_t>(b.i)].push_back({b.j, b.order});
    padj[static_cast<std::size_t>(b.j)].push_back({b.i, b.order});
  }
  std::vector<int> order;
  {
    std::vector<char> seen(static_cast<std::size_t>(k), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (const auto& [w, o] : padj[static_cast<std::size_t>(v)])
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          queue.push_back(w);
        }
    }
  }

  std::vector<std::vector<int>> rings_cache;
  bool rings_ready = false;
  auto ring_ok = [&](const Match& map) {
    if (!pat.ring) return true;
    if (!rings_ready) {
      rings_cache = minimum_cycle_basis(m);
      rings_ready = true;
    }
    for (const std::vector<int>& ring : rings_cache) {
      if (static_cast<int>(ring.size()) != pat.ring->size) continue;
      const std::set<int> rset(ring.begin(), ring.end());
      bool inside = true;
      for (int pa : pat.ring->atoms)
        if (!rset.count(map[static_cast<std::size_t>(pa)])) { inside = false; break; }
      if (inside) return true;
    }
    return false;
  };

  Match map(static_cast<std::size_t>(k), -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::map<std::vector<int>, Match> by_set;  // sorted atom set -> first match found

  auto extend = [&](auto&& self, std::size_t depth) -> void {
    if (depth == order.size()) {
      if (!ring_ok(map)) return;
      std::vector<int> key(map.begin(), map.end());
      std::sort(key.begin(), key.end());
      by_set.emplace(std::move(key), map);  // keeps the first representative
      return;
    }
    const int pi = order[depth];
    // candidates: neighbors of an already-mapped pattern neighbor, or every
    // atom for the root
    std::vector<int> cands;
    int anchor = -1;
    for (const auto& [pj, o] : padj[static_cast<std::size_t>(pi)])
      if (map[static_cast<std::size_t>(pj)] >= 0) { anchor = pj; break; }
    if (anchor < 0) {
      cands.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) cands[static_cast<std::size_t>(i)] = i;
    } else {
      cands = adj[static_cast<std::size_t>(map[static_cast<std::size_t>(anchor)])];
    }
    for (int mi : cands) {
      if (used[static_cast<std::size_t>(mi)] || !atom_ok(pat.atoms[static_cast<std::size_t>(pi)], mi)) continue;
      bool ok = true;
      for (const auto& [pj, o] : padj[static_cast<std::size_t>(pi)]) {
        const int mj = map[static_cast<std::size_t>(pj)];
        if (mj < 0) continue;
        const Bond* b = m.find_bond(mi, mj);
        if (!b || !bond_pred_ok(o, b->order)) { ok = false; break; }
      }
      if (!ok) continue;
      map[static_cast<std::size_t>(pi)] = mi;
      used[static_cast<std::size_t>(mi)] = 1;
      self(self, depth + 1);
      map[static_cast<std::size_t>(pi)] = -1;
      used[static_cast<std::size_t>(mi)] = 0;
    }
  };
  extend(extend, 0);

  std::vector<Match> out;
  out.reserve(by_set.size());
  for (auto& [key, match] : by_set) out.push_back(std::move(match));
  return out;
}

}  // namespace probekit
