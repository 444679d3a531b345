#include "probekit/chemprops.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "probekit/smiles.hpp"

namespace probekit {

const GroupDef& GroupLibrary::get(const std::string& name) const {
  const auto it = groups.find(name);
  if (it != groups.end()) return it->second;
  std::string known;
  for (const auto& [g, def] : groups) known += (known.empty() ? "" : ", ") + g;
  fail("unknown group '" + name + "' (known: " + known + ")");
}

long long count_atoms(const Molecule& m, const std::string& element) {
  if (!known_element(element)) fail("count_atoms: unsupported element '" + element + "'");
  long long count = 0;
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    const Atom& a = m.atoms[i];
    if (element == "H") {
      count += m.total_h(static_cast<int>(i));
      if (a.element == "H") ++count;
    } else if (a.element == element) {
      ++count;
    }
  }
  return count;
}

std::vector<std::vector<int>> perceive_rings(const Molecule& m) { return minimum_cycle_basis(m); }

namespace {

int cycle_rank(const Molecule& m) {
  return static_cast<int>(m.bonds.size()) - static_cast<int>(m.atoms.size()) + 1;
}

bool ring_matches_class(const Molecule& m, const std::vector<int>& ring, const GroupDef& def) {
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Atom& a = m.atoms[static_cast<std::size_t>(ring[i])];
    if (def.all_aromatic && !a.aromatic) return false;
    if (def.all_carbon && a.element != "C") return false;
    if (def.no_aromatic && a.aromatic) return false;
    if (def.all_single_bonds) {
      const Bond* b = m.find_bond(ring[i], ring[(i + 1) % ring.size()]);
      if (!b || b->order != BondOrder::Single) return false;
    }
  }
  return true;
}

}  // namespace

bool detect_group(const Molecule& m, const std::string& group, const GroupLibrary& lib) {
  const GroupDef& def = lib.get(group);
  switch (def.kind) {
    case GroupDef::Kind::Pattern:
      for (const Pattern& pat : def.variants)
        if (!match_pattern(m, pat).empty()) return true;
      return false;
    case GroupDef::Kind::RingClass:
      for (const auto& ring : perceive_rings(m))
        if (ring_matches_class(m, ring, def)) return true;
      return false;
    case GroupDef::Kind::CycleRank:
      return cycle_rank(m) >= def.min_rank;
  }
  return false;
}

std::optional<std::vector<int>> first_group_match(const Molecule& m, const std::string& group,
                                                  const GroupLibrary& lib) {
  const GroupDef& def = lib.get(group);
  switch (def.kind) {
    case GroupDef::Kind::Pattern:
      for (const Pattern& pat : def.variants) {
        const std::vector<Match> matches = match_pattern(m, pat);
        if (matches.empty()) continue;
        std::vector<int> set(matches.front().begin(), matches.front().end());
        std::sort(set.begin(), set.end());
        return set;
      }
      return std::nullopt;
    case GroupDef::Kind::RingClass:
      for (const auto& ring : perceive_rings(m))
        if (ring_matches_class(m, ring, def)) {
          std::vector<int> set = ring;
          std::sort(set.begin(), set.end());
          return set;
        }
      return std::nullopt;
    case GroupDef::Kind::CycleRank:
      fail("group '" + group + "' is a whole-molecule predicate with no atom set to remove");
  }
  return std::nullopt;
}

LabelTableResult compute_label_table(const std::string& smiles_path,
                                     const std::vector<std::string>& properties,
                                     const GroupLibrary& lib) {
  if (properties.empty()) fail("compute_label_table: empty property list");
  // validate up front so a bad property name fails before any parsing work
  for (const std::string& prop : properties) {
    if (prop.rfind("count_", 0) == 0) {
      const std::string el = prop.substr(6);
      if (!known_element(el)) fail("unknown count property '" + prop + "'");
    } else {
      lib.get(prop);
    }
  }

  const std::vector<SmilesRecord> records = read_smiles_file(smiles_path);
  if (records.empty()) fail("no molecules in " + smiles_path);

  LabelTableResult out;
  std::vector<Molecule> mols;
  for (const SmilesRecord& rec : records) {
    try {
      Molecule m = parse_smiles(rec.smiles);
      mols.push_back(std::move(m));
      out.table.ids.push_back(rec.id);
    } catch (const Error& e) {
      out.errors.emplace_back(rec.id, e.what());
    }
  }
  if (out.table.ids.empty()) fail("no molecule in " + smiles_path + " parsed successfully");

  for (const std::string& prop : properties) {
    LabelColumn col;
    col.name = prop;
    col.values.resize(static_cast<Eigen::Index>(mols.size()));
    if (prop.rfind("count_", 0) == 0) {
      col.kind = {Kind::Count, 0};
      const std::string el = prop.substr(6);
      for (std::size_t i = 0; i < mols.size(); ++i)
        col.values(static_cast<Eigen::Index>(i)) = static_cast<double>(count_atoms(mols[i], el));
    } else {
      col.kind = {Kind::Binary, 0};
      for (std::size_t i = 0; i < mols.size(); ++i)
        col.values(static_cast<Eigen::Index>(i)) = detect_group(mols[i], prop, lib) ? 1.0 : 0.0;
    }
    out.table.columns.push_back(std::move(col));
  }
  return out;
}

Molecule remove_group(const Molecule& m, const std::vector<int>& match) {
  if (match.empty()) fail("remove_group: empty match");
  std::set<int> removed;
  for (int i : match) {
    if (i < 0 || i >= static_cast<int>(m.atoms.size())) fail("remove_group: atom index out of range");
    removed.insert(i);
  }
  if (removed.size() == m.atoms.size()) fail("remove_group: removal leaves no atoms");

  std::vector<int> remap(m.atoms.size(), -1);
  Molecule out;
  for (std::size_t i = 0; i < m.atoms.size(); ++i)
    if (!removed.count(static_cast<int>(i))) {
      remap[i] = static_cast<int>(out.atoms.size());
      out.atoms.push_back(m.atoms[i]);
    }

  for (const Bond& b : m.bonds) {
    const bool ra = removed.count(b.a) > 0, rb = removed.count(b.b) > 0;
    if (ra && rb) continue;
    if (!ra && !rb) {
      out.bonds.push_back({remap[static_cast<std::size_t>(b.a)], remap[static_cast<std::size_t>(b.b)], b.order});
      continue;
    }
    // boundary bond: the survivor gets hydrogens for the lost bond order
    if (b.order == BondOrder::Aromatic)
      fail("remove_group: removal tears an aromatic ring open");
    const int survivor = ra ? b.b : b.a;
    out.atoms[static_cast<std::size_t>(remap[static_cast<std::size_t>(survivor)])].implicit_h += bond_sigma(b.order);
  }

  int heavy = 0;
  for (const Atom& a : out.atoms)
    if (a.element != "H") ++heavy;
  if (heavy < 2) fail("remove_group: fewer than 2 heavy atoms would remain");
  if (!is_connected(out)) fail("remove_group: removal disconnects the molecule");
  check_molecule(out);
  return out;
}

std::vector<MolPair> gen_pairs(const std::string& smiles_path, const std::string& group,
                               std::optional<std::size_t> limit, std::uint64_t seed,
                               const GroupLibrary& lib) {
  lib.get(group);
  const std::vector<SmilesRecord> records = read_smiles_file(smiles_path);

  std::vector<MolPair> pairs;
  for (const SmilesRecord& rec : records) {
    Molecule source;
    try {
      source = parse_smiles(rec.smiles);
    } catch (const Error&) {
      continue;  // unparseable rows are simply not candidates
    }
    const auto match = first_group_match(source, group, lib);
    if (!match) continue;
    Molecule target;
    try {
      target = remove_group(source, *match);
    } catch (const Error&) {
      continue;  // rejected removal (disconnection, valence, too small)
    }
    if (detect_group(target, group, lib)) continue;  // another occurrence survives

    MolPair p;
    p.source_id = rec.id;
    p.target_id = rec.id + "_wo_" + group;
    p.source = std::move(source);
    p.target = std::move(target);
    p.group = group;
    p.removed_atoms = *match;
    pairs.push_back(std::move(p));
  }
  if (pairs.empty()) fail("gen_pairs: no valid pairs for group '" + group + "' in " + smiles_path);

  if (limit && pairs.size() > *limit) {
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(*limit);
    std::sort(idx.begin(), idx.end());  // keep input order among the chosen
    std::vector<MolPair> chosen;
    chosen.reserve(*limit);
    for (std::size_t i : idx) chosen.push_back(std::move(pairs[i]));
    pairs = std::move(chosen);
  }
  return pairs;
}

void write_pair_files(const std::vector<MolPair>& pairs, const std::string& csv_path) {
  std::string stem = csv_path;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);

  std::ofstream out(csv_path, std::ios::binary);
  if (!out) fail("cannot write " + csv_path);
  out << "source_id,target_id,group\n";
  for (const MolPair& p : pairs)
    out << csv::escape(p.source_id) << "," << csv::escape(p.target_id) << "," << csv::escape(p.group) << "\n";
  if (!out) fail("write failed: " + csv_path);

  std::vector<SmilesRecord> sources, targets;
  for (const MolPair& p : pairs) {
    sources.push_back({p.source_id, write_smiles(p.source), 0});
    targets.push_back({p.target_id, write_smiles(p.target), 0});
  }
  write_smiles_file(stem + ".source.smi", sources);
  write_smiles_file(stem + ".target.smi", targets);
}

}  // namespace probekit
