#include <fstream>
#include <json.hpp>
#include <sstream>

#include "probekit/chemprops.hpp"
#include "probekit/error.hpp"

namespace probekit {

namespace {

// the shipped library. kinds: "pattern" (default; subgraph with predicates,
// either inline or under "variants"), "ring_class" (a perceived ring matching
// flags), "cycle_rank" (whole-molecule cycle space threshold).
const char* kDefaultLibraryJson = R"json({
  "aromatic_ring": {"kind": "ring_class", "all_aromatic": true},
  "aromatic_carbocycle": {"kind": "ring_class", "all_aromatic": true, "all_carbon": true},
  "saturated_ring": {"kind": "ring_class", "all_single_bonds": true, "no_aromatic": true},
  "bicyclic": {"kind": "cycle_rank", "min_rank": 2},
  "benzene": {
    "atoms": [
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true}
    ],
    "bonds": [[0,1,"aromatic"],[1,2,"aromatic"],[2,3,"aromatic"],[3,4,"aromatic"],[4,5,"aromatic"],[5,0,"aromatic"]],
    "ring": {"atoms": [0,1,2,3,4,5], "size": 6}
  },
  "pyridine": {
    "atoms": [
      {"element": "N", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true}
    ],
    "bonds": [[0,1,"aromatic"],[1,2,"aromatic"],[2,3,"aromatic"],[3,4,"aromatic"],[4,5,"aromatic"],[5,0,"aromatic"]],
    "ring": {"atoms": [0,1,2,3,4,5], "size": 6}
  },
  "aniline": {
    "atoms": [
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "N", "aromatic": false, "charge": 0, "min_h": 1, "only_single_bonds": true}
    ],
    "bonds": [[0,1,"aromatic"],[1,2,"aromatic"],[2,3,"aromatic"],[3,4,"aromatic"],[4,5,"aromatic"],[5,0,"aromatic"],[0,6,"single"]],
    "ring": {"atoms": [0,1,2,3,4,5], "size": 6}
  },
  "para_hydroxylation": {
    "atoms": [
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true, "min_h": 1},
      {"element": "C", "aromatic": true}, {"element": "C", "aromatic": true},
      {"element": "O", "aromatic": false, "charge": 0, "min_h": 1}
    ],
    "bonds": [[0,1,"aromatic"],[1,2,"aromatic"],[2,3,"aromatic"],[3,4,"aromatic"],[4,5,"aromatic"],[5,0,"aromatic"],[0,6,"single"]],
    "ring": {"atoms": [0,1,2,3,4,5], "size": 6}
  },
  "ketone": {
    "atoms": [
      {"element": "C", "aromatic": false},
      {"element": "O", "charge": 0},
      {"element": "C"},
      {"element": "C"}
    ],
    "bonds": [[0,1,"double"],[0,2,"single"],[0,3,"single"]]
  },
  "methoxy": {
    "atoms": [
      {"element": "O", "aromatic": false, "charge": 0, "only_single_bonds": true},
      {"element": "C", "aromatic": false, "min_h": 3},
      {"element": "C"}
    ],
    "bonds": [[0,1,"single"],[0,2,"single"]]
  },
  "amide": {
    "atoms": [
      {"element": "C", "aromatic": false},
      {"element": "O", "charge": 0},
      {"element": "N", "aromatic": false, "charge": 0}
    ],
    "bonds": [[0,1,"double"],[0,2,"single"]]
  },
  "nitro": {
    "kind": "pattern",
    "variants": [
      {
        "atoms": [
          {"element": "N", "aromatic": false, "charge": 1},
          {"element": "O", "charge": 0},
          {"element": "O", "charge": -1}
        ],
        "bonds": [[0,1,"double"],[0,2,"single"]]
      },
      {
        "atoms": [
          {"element": "N", "aromatic": false, "charge": 0},
          {"element": "O", "charge": 0},
          {"element": "O", "charge": 0}
        ],
        "bonds": [[0,1,"double"],[0,2,"double"]]
      }
    ]
  }
})json";

AtomPred parse_atom_pred(const nlohmann::json& j) {
  AtomPred p;
  if (j.contains("element")) p.element = j.at("element").get<std::string>();
  if (j.contains("aromatic")) p.aromatic = j.at("aromatic").get<bool>();
  if (j.contains("charge")) p.charge = j.at("charge").get<int>();
  if (j.contains("min_degree")) p.min_degree = j.at("min_degree").get<int>();
  if (j.contains("min_h")) p.min_h = j.at("min_h").get<int>();
  if (j.contains("only_single_bonds")) p.only_single_bonds = j.at("only_single_bonds").get<bool>();
  return p;
}

BondPred parse_bond_pred(const std::string& s) {
  if (s == "single") return BondPred::Single;
  if (s == "double") return BondPred::Double;
  if (s == "triple") return BondPred::Triple;
  if (s == "aromatic") return BondPred::Aromatic;
  if (s == "any") return BondPred::Any;
  fail("group library: unknown bond order '" + s + "'");
}

Pattern parse_pattern(const std::string& name, const nlohmann::json& j) {
  Pattern pat;
  pat.name = name;
  for (const auto& a : j.at("atoms")) pat.atoms.push_back(parse_atom_pred(a));
  if (j.contains("bonds"))
    for (const auto& b : j.at("bonds"))
      pat.bonds.push_back({b.at(0).get<int>(), b.at(1).get<int>(), parse_bond_pred(b.at(2).get<std::string>())});
  if (j.contains("ring")) {
    RingConstraint rc;
    rc.atoms = j.at("ring").at("atoms").get<std::vector<int>>();
    rc.size = j.at("ring").at("size").get<int>();
    pat.ring = rc;
  }
  return pat;
}

GroupDef parse_group_def(const std::string& name, const nlohmann::json& j) {
  GroupDef def;
  const std::string kind = j.contains("kind") ? j.at("kind").get<std::string>() : "pattern";
  if (kind == "pattern") {
    def.kind = GroupDef::Kind::Pattern;
    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) def.variants.push_back(parse_pattern(name, v));
    } else {
      def.variants.push_back(parse_pattern(name, j));
    }
    if (def.variants.empty()) fail("group '" + name + "' has no pattern variants");
  } else if (kind == "ring_class") {
    def.kind = GroupDef::Kind::RingClass;
    def.all_aromatic = j.value("all_aromatic", false);
    def.all_carbon = j.value("all_carbon", false);
    def.all_single_bonds = j.value("all_single_bonds", false);
    def.no_aromatic = j.value("no_aromatic", false);
    if (!def.all_aromatic && !def.all_carbon && !def.all_single_bonds && !def.no_aromatic)
      fail("ring_class group '" + name + "' sets no constraint flags");
  } else if (kind == "cycle_rank") {
    def.kind = GroupDef::Kind::CycleRank;
    def.min_rank = j.at("min_rank").get<int>();
    if (def.min_rank < 1) fail("cycle_rank group '" + name + "' needs min_rank >= 1");
  } else {
    fail("group '" + name + "' has unknown kind '" + kind + "'");
  }
  return def;
}

}  // namespace

GroupLibrary parse_group_library(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("group library JSON parse error: ") + e.what());
  }
  if (!j.is_object() || j.empty()) fail("group library must be a non-empty JSON object");
  GroupLibrary lib;
  try {
    for (const auto& [name, def] : j.items()) lib.groups[name] = parse_group_def(name, def);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("group library JSON structure error: ") + e.what());
  }
  return lib;
}

GroupLibrary load_group_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open group library: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_group_library(buf.str());
}

const GroupLibrary& default_group_library() {
  static const GroupLibrary lib = parse_group_library(kDefaultLibraryJson);
  return lib;
}

}  // namespace probekit
