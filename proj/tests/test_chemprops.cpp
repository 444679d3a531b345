#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "probekit/chemprops.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "probekit/smiles.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kAllGroups = {
    "aromatic_carbocycle", "aromatic_ring", "saturated_ring", "aniline",
    "benzene",             "bicyclic",      "ketone",         "methoxy",
    "para_hydroxylation",  "pyridine",      "amide",          "nitro"};

template <typename Fn>
void check_throws_with(Fn&& fn, const std::string& fragment) {
  try {
    fn();
    FAIL_CHECK("expected an Error mentioning '" << fragment << "', nothing thrown");
  } catch (const Error& e) {
    CAPTURE(e.what());
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "probekit_test_chemprops";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream out(p);
  out << body;
  return p;
}

int heavy_atoms(const Molecule& m) {
  int n = 0;
  for (const auto& a : m.atoms) n += a.element != "H";
  return n;
}

Molecule permute_molecule(const Molecule& m, const std::vector<int>& perm) {
  Molecule out;
  out.atoms.resize(m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i)
    out.atoms[static_cast<std::size_t>(perm[i])] = m.atoms[i];
  for (const auto& b : m.bonds)
    out.bonds.push_back({perm[static_cast<std::size_t>(b.a)], perm[static_cast<std::size_t>(b.b)], b.order});
  return out;
}

// mirrors the documented predicate semantics; used as an oracle for the
// backtracking matcher on small molecules
bool atom_ok(const Molecule& m, int ai, const AtomPred& p) {
  const Atom& a = m.atoms[static_cast<std::size_t>(ai)];
  if (!p.element.empty() && a.element != p.element) return false;
  if (p.aromatic && a.aromatic != *p.aromatic) return false;
  if (p.charge && a.formal_charge != *p.charge) return false;
  int degree = 0;
  bool all_single = true;
  for (const auto& b : m.bonds) {
    if (b.a != ai && b.b != ai) continue;
    ++degree;
    if (b.order != BondOrder::Single) all_single = false;
  }
  if (degree < p.min_degree) return false;
  if (m.total_h(ai) < p.min_h) return false;
  if (p.only_single_bonds && !all_single) return false;
  return true;
}

bool bond_ok(BondOrder order, BondPred pred) {
  switch (pred) {
    case BondPred::Single: return order == BondOrder::Single;
    case BondPred::Double: return order == BondOrder::Double;
    case BondPred::Triple: return order == BondOrder::Triple;
    case BondPred::Aromatic: return order == BondOrder::Aromatic;
    case BondPred::Any: return true;
  }
  return false;
}

// all injective maps by brute force, deduplicated by mapped atom set
std::size_t brute_force_match_count(const Molecule& m, const Pattern& pat) {
  const std::size_t k = pat.atoms.size();
  std::vector<int> idx(m.atoms.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::set<std::vector<int>> seen;
  std::vector<int> map(k);
  std::vector<bool> used(m.atoms.size(), false);
  const std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == k) {
      for (const auto& pb : pat.bonds) {
        const Bond* b = m.find_bond(map[static_cast<std::size_t>(pb.i)], map[static_cast<std::size_t>(pb.j)]);
        if (b == nullptr || !bond_ok(b->order, pb.order)) return;
      }
      if (pat.ring) {
        bool ok_ring = false;
        for (const auto& ring : perceive_rings(m)) {
          if (static_cast<int>(ring.size()) != pat.ring->size) continue;
          const std::set<int> in_ring(ring.begin(), ring.end());
          bool all_in = true;
          for (const int pa : pat.ring->atoms)
            if (in_ring.count(map[static_cast<std::size_t>(pa)]) == 0) all_in = false;
          if (all_in) {
            ok_ring = true;
            break;
          }
        }
        if (!ok_ring) return;
      }
      std::vector<int> key = map;
      std::sort(key.begin(), key.end());
      seen.insert(std::move(key));
      return;
    }
    for (const int ai : idx) {
      if (used[static_cast<std::size_t>(ai)] || !atom_ok(m, ai, pat.atoms[pos])) continue;
      used[static_cast<std::size_t>(ai)] = true;
      map[pos] = ai;
      rec(pos + 1);
      used[static_cast<std::size_t>(ai)] = false;
    }
  };
  rec(0);
  return seen.size();
}

}  // namespace

TEST_CASE("count_atoms counts heavy atoms and total hydrogens") {
  const Molecule ethanol = parse_smiles("CCO");
  CHECK(count_atoms(ethanol, "C") == 2);
  CHECK(count_atoms(ethanol, "O") == 1);
  CHECK(count_atoms(ethanol, "N") == 0);
  CHECK(count_atoms(ethanol, "H") == 6);
  CHECK(count_atoms(parse_smiles("c1ccncc1"), "N") == 1);
  CHECK(count_atoms(parse_smiles("[NH4+]"), "H") == 4);
  CHECK(count_atoms(parse_smiles("C[N+](=O)[O-]"), "O") == 2);
  CHECK_THROWS_AS(count_atoms(ethanol, "Xx"), Error);
}

TEST_CASE("perceive_rings returns the cycle basis") {
  CHECK(perceive_rings(parse_smiles("CCO")).empty());
  const auto benzene = perceive_rings(parse_smiles("c1ccccc1"));
  REQUIRE(benzene.size() == 1);
  CHECK(benzene[0].size() == 6);
  const auto naph = perceive_rings(parse_smiles("c1ccc2ccccc2c1"));
  REQUIRE(naph.size() == 2);
  CHECK(naph[0].size() == 6);
  CHECK(naph[1].size() == 6);
}

TEST_CASE("match_pattern agrees with a brute-force oracle") {
  const GroupLibrary& lib = default_group_library();
  const std::vector<std::string> molecules = {"CC(C)=O", "c1ccccc1",       "c1ccncc1",
                                              "CC(N)=O",  "COc1ccccc1",     "Cc1ccc(O)cc1",
                                              "O=C1CCCCC1", "Nc1ccccc1",    "CC(=O)Nc1ccccc1"};
  for (const auto& [name, def] : lib.groups) {
    if (def.kind != GroupDef::Kind::Pattern) continue;
    for (const auto& smi : molecules) {
      const Molecule m = parse_smiles(smi);
      std::size_t expected = 0;
      std::set<std::vector<int>> distinct;
      for (const auto& variant : def.variants) {
        (void)expected;
        for (auto match : match_pattern(m, variant)) {
          std::sort(match.begin(), match.end());
          distinct.insert(match);
        }
      }
      std::set<std::vector<int>> brute;
      for (const auto& variant : def.variants) {
        const std::size_t cnt = brute_force_match_count(m, variant);
        // count per variant must agree before merging variants
        std::size_t got = 0;
        std::set<std::vector<int>> per;
        for (auto match : match_pattern(m, variant)) {
          std::sort(match.begin(), match.end());
          per.insert(match);
          ++got;
        }
        CAPTURE(name);
        CAPTURE(smi);
        CHECK(per.size() == cnt);
        CHECK(got == per.size());  // matcher already deduplicates
        brute.insert(per.begin(), per.end());
      }
      CHECK(distinct == brute);
    }
  }
}

TEST_CASE("hand-checked pattern match counts") {
  const GroupLibrary& lib = default_group_library();
  const auto count_matches = [&](const std::string& smi, const std::string& group) {
    const Molecule m = parse_smiles(smi);
    std::set<std::vector<int>> distinct;
    for (const auto& variant : lib.get(group).variants)
      for (auto match : match_pattern(m, variant)) {
        std::sort(match.begin(), match.end());
        distinct.insert(match);
      }
    return distinct.size();
  };
  CHECK(count_matches("c1ccccc1", "benzene") == 1);
  CHECK(count_matches("CC(C)=O", "ketone") == 1);
  CHECK(count_matches("c1ccncc1", "benzene") == 0);
  CHECK(count_matches("CC(N)=O", "amide") == 1);
  CHECK(count_matches("CC(N)=O", "ketone") == 0);
  CHECK(count_matches("c1ccc2ccccc2c1", "benzene") == 2);
}

TEST_CASE("detect_group matches the frozen molecule truth table") {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/truth_molecules.csv");
  REQUIRE(in.good());
  csv::Reader reader(in);
  std::vector<std::string> header;
  REQUIRE(reader.next(header));
  REQUIRE(header.size() >= 3);
  CHECK(header[0] == "id");
  CHECK(header[1] == "smiles");

  const GroupLibrary& lib = default_group_library();
  std::vector<std::string> row;
  std::size_t rows = 0;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    REQUIRE(row.size() == header.size());
    ++rows;
    const std::string& id = row[0];
    CAPTURE(id);
    const Molecule m = parse_smiles(row[1]);
    for (std::size_t c = 2; c < header.size(); ++c) {
      const std::string& col = header[c];
      CAPTURE(col);
      const long long want = std::stoll(row[c]);
      if (col.rfind("count_", 0) == 0) {
        CHECK(count_atoms(m, col.substr(6)) == want);
      } else {
        CHECK(detect_group(m, col, lib) == (want == 1));
      }
    }
  }
  CHECK(rows == 20);
}

TEST_CASE("detect_group rejects unknown names, naming the library") {
  const GroupLibrary& lib = default_group_library();
  check_throws_with([&] { detect_group(parse_smiles("CCO"), "oxirane", lib); }, "unknown group 'oxirane'");
  check_throws_with([&] { detect_group(parse_smiles("CCO"), "oxirane", lib); }, "benzene");
}

TEST_CASE("detect_group is invariant under atom reindexing") {
  const GroupLibrary& lib = default_group_library();
  const std::vector<std::string> molecules = {"c1ccccc1[N+](=O)[O-]", "CC(=O)Nc1ccccc1",
                                              "COc1ccccc1", "Cc1ccc(O)cc1", "C1CCC2CCCCC2C1"};
  Rng rng(5);
  for (const auto& smi : molecules) {
    const Molecule m = parse_smiles(smi);
    std::vector<int> perm(m.atoms.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int rep = 0; rep < 3; ++rep) {
      rng.shuffle(perm);
      const Molecule p = permute_molecule(m, perm);
      check_molecule(p);
      for (const auto& g : kAllGroups) {
        CAPTURE(smi);
        CAPTURE(g);
        CHECK(detect_group(p, g, lib) == detect_group(m, g, lib));
      }
    }
  }
}

TEST_CASE("first_group_match finds a deterministic atom set") {
  const GroupLibrary& lib = default_group_library();
  const Molecule nitrobenzene = parse_smiles("c1ccccc1[N+](=O)[O-]");
  const auto match = first_group_match(nitrobenzene, "nitro", lib);
  REQUIRE(match.has_value());
  CHECK(match->size() == 3);
  CHECK(std::is_sorted(match->begin(), match->end()));
  CHECK_FALSE(first_group_match(parse_smiles("CCO"), "nitro", lib).has_value());
  check_throws_with([&] { first_group_match(nitrobenzene, "bicyclic", lib); }, "no atom set");
}

TEST_CASE("remove_group repairs hydrogens or rejects cleanly") {
  const GroupLibrary& lib = default_group_library();

  SUBCASE("nitrobenzene minus nitro is benzene") {
    const Molecule src = parse_smiles("c1ccccc1[N+](=O)[O-]");
    const auto match = first_group_match(src, "nitro", lib);
    REQUIRE(match.has_value());
    const Molecule tgt = remove_group(src, *match);
    check_molecule(tgt);
    CHECK(heavy_atoms(tgt) == heavy_atoms(src) - 3);
    CHECK(graphs_isomorphic(tgt, parse_smiles("c1ccccc1")));
    CHECK_FALSE(detect_group(tgt, "nitro", lib));
  }
  SUBCASE("acetanilide minus amide disconnects") {
    const Molecule src = parse_smiles("CC(=O)Nc1ccccc1");
    const auto match = first_group_match(src, "amide", lib);
    REQUIRE(match.has_value());
    check_throws_with([&] { remove_group(src, *match); }, "disconnect");
  }
  SUBCASE("toluene minus benzene leaves too little") {
    const Molecule src = parse_smiles("Cc1ccccc1");
    const auto match = first_group_match(src, "benzene", lib);
    REQUIRE(match.has_value());
    check_throws_with([&] { remove_group(src, *match); }, "fewer than 2 heavy atoms");
  }
  SUBCASE("tearing a fused aromatic ring is rejected") {
    const Molecule src = parse_smiles("c1ccc2ccccc2c1");
    const auto match = first_group_match(src, "benzene", lib);
    REQUIRE(match.has_value());
    check_throws_with([&] { remove_group(src, *match); }, "aromatic");
  }
  SUBCASE("methoxy on an aromatic carrier is rejected") {
    // the methoxy match covers O-CH3 plus the attachment carbon, which on
    // anisole sits in the ring
    const Molecule src = parse_smiles("COc1ccccc1");
    const auto match = first_group_match(src, "methoxy", lib);
    REQUIRE(match.has_value());
    CHECK(match->size() == 3);
    check_throws_with([&] { remove_group(src, *match); }, "aromatic");
  }
  SUBCASE("methyl propyl ether minus methoxy is ethane") {
    const Molecule src = parse_smiles("COCCC");
    const auto match = first_group_match(src, "methoxy", lib);
    REQUIRE(match.has_value());
    const Molecule tgt = remove_group(src, *match);
    check_molecule(tgt);
    CHECK(heavy_atoms(tgt) == 2);
    CHECK(graphs_isomorphic(tgt, parse_smiles("CC")));
  }
}

TEST_CASE("compute_label_table builds columns and a clean error sidecar") {
  const auto dir = scratch_dir();
  const GroupLibrary& lib = default_group_library();

  SUBCASE("two clean rows") {
    const auto p = write_file(dir, "two.smi", "a\tCCO\nb\tc1ccccc1\n");
    const LabelTableResult r = compute_label_table(p.string(), {"count_C", "benzene"}, lib);
    CHECK(r.errors.empty());
    REQUIRE(r.table.ids == std::vector<std::string>{"a", "b"});
    REQUIRE(r.table.columns.size() == 2);
    CHECK(r.table.columns[0].name == "count_C");
    CHECK(r.table.columns[0].kind.kind == Kind::Count);
    CHECK(r.table.columns[0].values(0) == 2);
    CHECK(r.table.columns[0].values(1) == 6);
    CHECK(r.table.columns[1].kind.kind == Kind::Binary);
    CHECK(r.table.columns[1].values(0) == 0);
    CHECK(r.table.columns[1].values(1) == 1);
  }
  SUBCASE("malformed row goes to the sidecar") {
    const auto p = write_file(dir, "bad.smi", "a\tCCO\nbad\tC(\nb\tCC\n");
    const LabelTableResult r = compute_label_table(p.string(), {"count_C"}, lib);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].first == "bad");
    CHECK(r.errors[0].second.find("offset") != std::string::npos);
    CHECK(r.table.ids == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("degenerate inputs error") {
    const auto p = write_file(dir, "one.smi", "a\tCCO\n");
    CHECK_THROWS_AS(compute_label_table(p.string(), {}, lib), Error);
    check_throws_with([&] { compute_label_table(p.string(), {"count_Xx"}, lib); }, "count_Xx");
    check_throws_with([&] { compute_label_table(p.string(), {"blah"}, lib); }, "blah");
    const auto junk = write_file(dir, "junk.smi", "a\tC(\nb\t)(\n");
    CHECK_THROWS_AS(compute_label_table(junk.string(), {"count_C"}, lib), Error);
  }
}

TEST_CASE("gen_pairs produces group-free targets deterministically") {
  const GroupLibrary& lib = default_group_library();
  const std::string nitro10 = std::string(TEST_DATA_DIR) + "/nitro10.smi";

  const auto pairs = gen_pairs(nitro10, "nitro", std::nullopt, 0, lib);
  REQUIRE(pairs.size() == 10);
  for (const auto& pr : pairs) {
    CAPTURE(pr.source_id);
    CHECK(detect_group(pr.source, "nitro", lib));
    CHECK_FALSE(detect_group(pr.target, "nitro", lib));
    CHECK(pr.group == "nitro");
    CHECK(heavy_atoms(pr.target) == heavy_atoms(pr.source) - static_cast<int>(pr.removed_atoms.size()));
    CHECK(pr.removed_atoms.size() == 3);
    check_molecule(pr.target);
  }

  SUBCASE("limit subsamples deterministically per seed") {
    const auto a = gen_pairs(nitro10, "nitro", 4, 7, lib);
    const auto b = gen_pairs(nitro10, "nitro", 4, 7, lib);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].source_id == b[i].source_id);
    const auto c = gen_pairs(nitro10, "nitro", 4, 8, lib);
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].source_id == c[i].source_id;
    CHECK_FALSE(same);
  }
  SUBCASE("group-free input errors") {
    const auto dir = scratch_dir();
    const auto p = write_file(dir, "plain.smi", "a\tCCO\nb\tCC\n");
    check_throws_with([&] { gen_pairs(p.string(), "nitro", std::nullopt, 0, lib); }, "no valid pairs");
  }
}

TEST_CASE("write_pair_files emits a CSV and two SMILES files") {
  const GroupLibrary& lib = default_group_library();
  const auto pairs =
      gen_pairs(std::string(TEST_DATA_DIR) + "/nitro10.smi", "nitro", 3, 1, lib);
  const auto dir = scratch_dir();
  const std::string stem = (dir / "pairs").string();
  write_pair_files(pairs, stem + ".csv");

  std::ifstream csv_in(stem + ".csv");
  REQUIRE(csv_in.good());
  std::string header;
  std::getline(csv_in, header);
  CHECK(header == "source_id,target_id,group");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv_in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == pairs.size());

  const auto sources = read_smiles_file(stem + ".source.smi");
  const auto targets = read_smiles_file(stem + ".target.smi");
  REQUIRE(sources.size() == pairs.size());
  REQUIRE(targets.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(sources[i].id == pairs[i].source_id);
    CHECK(targets[i].id == pairs[i].target_id);
    CHECK(graphs_isomorphic(parse_smiles(sources[i].smiles), pairs[i].source));
    CHECK(graphs_isomorphic(parse_smiles(targets[i].smiles), pairs[i].target));
  }
}

TEST_CASE("custom group libraries parse from JSON") {
  const std::string json = R"({
    "hydroxyl": {
      "atoms": [ {"element": "O", "min_h": 1, "only_single_bonds": true}, {"element": "C"} ],
      "bonds": [ [0, 1, "single"] ]
    }
  })";
  const GroupLibrary lib = parse_group_library(json);
  CHECK(detect_group(parse_smiles("CCO"), "hydroxyl", lib));
  CHECK_FALSE(detect_group(parse_smiles("COC"), "hydroxyl", lib));
  CHECK_FALSE(detect_group(parse_smiles("CC(C)=O"), "hydroxyl", lib));
  check_throws_with([] { parse_group_library("{"); }, "parse error");
  check_throws_with([] { parse_group_library(R"({"x": {"kind": "wat"}})"); }, "unknown kind");
  check_throws_with([] { parse_group_library(R"({"x": {"atoms": [{"element": 3}]}})"); },
                    "structure error");
  check_throws_with([] { parse_group_library(R"({"x": {"atoms": [], "bonds": [[0,1,"septuple"]]}})"); },
                    "unknown bond order");
  // an empty atom list only surfaces once the pattern runs
  const GroupLibrary empty_lib = parse_group_library(R"({"x": {"atoms": []}})");
  check_throws_with([&] { detect_group(parse_smiles("C"), "x", empty_lib); }, "no atoms");
}
