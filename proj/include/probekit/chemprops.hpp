#pragma once

// Property computation on molecules: atom counts, functional-group detection
// against a JSON-defined group library, and pairwise dataset construction by
// group removal with hydrogen refill.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probekit/core.hpp"
#include "probekit/molecule.hpp"
#include "probekit/patterns.hpp"

namespace probekit {

struct GroupDef {
  enum class Kind { Pattern, RingClass, CycleRank };
  Kind kind = Kind::Pattern;

  std::vector<Pattern> variants;  // Pattern groups; any variant matching counts

  // RingClass groups: a perceived ring satisfying every set flag
  bool all_aromatic = false;
  bool all_carbon = false;
  bool all_single_bonds = false;
  bool no_aromatic = false;

  int min_rank = 0;  // CycleRank groups: cycle space rank threshold
};

struct GroupLibrary {
  std::map<std::string, GroupDef> groups;

  const GroupDef& get(const std::string& name) const;  // error names the known groups
};

// built-in library: aromatic_carbocycle, aromatic_ring, saturated_ring,
// aniline, benzene, bicyclic, ketone, methoxy, para_hydroxylation, pyridine,
// amide, nitro
const GroupLibrary& default_group_library();
GroupLibrary parse_group_library(const std::string& json_text);
GroupLibrary load_group_library(const std::string& path);

// heavy atoms of the element; for H, total hydrogen count (explicit +
// implicit + free H atoms)
long long count_atoms(const Molecule& m, const std::string& element);

// minimum cycle basis as ordered atom cycles
std::vector<std::vector<int>> perceive_rings(const Molecule& m);

bool detect_group(const Molecule& m, const std::string& group, const GroupLibrary& lib);

// deterministic first occurrence as a sorted molecule atom set; nullopt when
// the group is absent. cycle-rank groups have no atom set and error.
std::optional<std::vector<int>> first_group_match(const Molecule& m, const std::string& group,
                                                  const GroupLibrary& lib);

struct LabelTableResult {
  LabelTable table;
  std::vector<std::pair<std::string, std::string>> errors;  // (id, message) per unparseable row
};

// properties: "count_<element>" or a group name. counts become kind=count,
// groups kind=binary.
LabelTableResult compute_label_table(const std::string& smiles_path,
                                     const std::vector<std::string>& properties,
                                     const GroupLibrary& lib);

// deletes the matched atoms; surviving atoms regain the lost bond order as
// implicit hydrogens. rejects removals that tear an aromatic bond, disconnect
// the molecule, leave fewer than 2 heavy atoms, or break a valence.
Molecule remove_group(const Molecule& m, const std::vector<int>& match);

struct MolPair {
  std::string source_id, target_id;
  Molecule source, target;
  std::string group;
  std::vector<int> removed_atoms;  // indices in source
};

// one pair per molecule that contains the group and survives removal of its
// first match; `limit` subsamples the valid pairs deterministically.
std::vector<MolPair> gen_pairs(const std::string& smiles_path, const std::string& group,
                               std::optional<std::size_t> limit, std::uint64_t seed,
                               const GroupLibrary& lib);

// pairs CSV `source_id,target_id,group` plus `<stem>.source.smi` and
// `<stem>.target.smi` alongside
void write_pair_files(const std::vector<MolPair>& pairs, const std::string& csv_path);

}  // namespace probekit
