#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include <nmln/errors.hpp>
#include <nmln/io.hpp>

#include "support.hpp"

using namespace nmln;
namespace fs = std::filesystem;

namespace {

fs::path data_dir() { return fs::path(NMLN_DATA_DIR); }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nmln_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

SignatureSpec spec_of(const std::string& text) {
  std::istringstream in(text);
  return parse_signature(in);
}

std::vector<AtomRecord> atoms_of(const std::string& text) {
  std::istringstream in(text);
  return parse_atoms(in);
}

std::size_t parse_error_line(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("signature files") {
  const auto spec = spec_of("# people\nsm/1\nfr/2\n\nconstants: Alice, Bob,Eve\n");
  REQUIRE(spec.predicates.size() == 2);
  CHECK(spec.predicates[1] == Predicate{"fr", 2});
  CHECK(spec.constants == std::vector<std::string>{"Alice", "Bob", "Eve"});
  CHECK_FALSE(spec_of("sm/1\n").constants.has_value());
  CHECK(parse_error_line([] { spec_of("sm/1\nfr/3\n"); }) == 2);
  CHECK(parse_error_line([] { spec_of("sm\n"); }) == 1);
  CHECK(parse_error_line([] { spec_of("constants: a\nconstants: b\n"); }) == 2);
}

TEST_CASE("atom files") {
  const auto records = atoms_of("sm(Alice)\n# comment\nfr(Alice, Bob) 1\nfr(Bob,Eve) 0\n");
  REQUIRE(records.size() == 3);
  CHECK(records[1].args == std::vector<std::string>{"Alice", "Bob"});
  CHECK(records[1].label == true);
  CHECK(records[2].label == false);
  CHECK_FALSE(records[0].label.has_value());
  CHECK(records[2].line == 4);
  CHECK(parse_error_line([] { atoms_of("sm(Alice)\nsm(Alice\n"); }) == 2);
  CHECK(parse_error_line([] { atoms_of("\n\nsm(Alice) maybe\n"); }) == 3);
  CHECK(parse_error_line([] { atoms_of("p(a, b, c)\n"); }) == 1);
}

TEST_CASE("load_kb") {
  const auto sig_path = scratch("people.sig");
  write_file(sig_path, "fr/2\nsm/1\nconstants: Alice, Bob, Eve\n");
  SUBCASE("the running example minus one friendship") {
    const auto kb_path = scratch("people.kb");
    write_file(kb_path, "sm(Alice)\nfr(Alice, Bob)\n");
    const World w = load_kb(kb_path, sig_path);
    CHECK(w.count_true() == 2);
    CHECK(w.get(GroundAtom{1, 1, {0, 0}}));
    CHECK(w.get(GroundAtom{0, 2, {0, 1}}));
    CHECK_FALSE(w.get(GroundAtom{0, 2, {1, 2}}));
  }
  SUBCASE("empty file") {
    const auto kb_path = scratch("empty.kb");
    write_file(kb_path, "");
    CHECK(load_kb(kb_path, sig_path).count_true() == 0);
  }
  SUBCASE("unknown symbols report their line") {
    const auto kb_path = scratch("bad.kb");
    write_file(kb_path, "sm(Alice)\nsm(Zed)\n");
    CHECK(parse_error_line([&] { load_kb(kb_path, sig_path); }) == 2);
    write_file(kb_path, "sm(Alice)\n\nsmokes(Bob)\n");
    CHECK(parse_error_line([&] { load_kb(kb_path, sig_path); }) == 3);
    write_file(kb_path, "fr(Alice)\n");
    CHECK(parse_error_line([&] { load_kb(kb_path, sig_path); }) == 1);
  }
  SUBCASE("auto-extension") {
    const auto open_sig = scratch("open.sig");
    write_file(open_sig, "sm/1\n");
    const auto kb_path = scratch("extend.kb");
    write_file(kb_path, "sm(Zed)\nlikes(Zed, Amy)\n");
    CHECK_THROWS_AS(load_kb(kb_path, open_sig), ParseError);
    const World w = load_kb(kb_path, open_sig, LoadOptions{true});
    CHECK(w.signature().constants() == std::vector<std::string>{"Zed", "Amy"});
    CHECK(w.signature().find_predicate("likes").has_value());
    CHECK(w.count_true() == 2);
  }
  CHECK_THROWS_AS(load_kb(scratch("missing.kb"), sig_path), InvalidArgument);
}

TEST_CASE("property: load_kb inverts save_world") {
  Rng rng(1);
  const auto sig = testing::smokers_signature(6);
  const auto sig_path = scratch("round.sig");
  {
    std::ofstream out(sig_path);
    write_signature(out, *sig);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const World w = testing::random_world(sig, rng, 0.3);
    const auto path = scratch("round.kb");
    save_world(w, path);
    const World back = load_kb(path, sig_path);
    CHECK(back == w);
  }
}

TEST_CASE("bundled datasets load") {
  const World smokers = load_kb(data_dir() / "smokers" / "world.txt",
                                data_dir() / "smokers" / "signature.txt");
  CHECK(smokers.signature().num_constants() == 8);
  CHECK(smokers.count_true() > 0);
  const World molecule = load_kb(data_dir() / "examples" / "molecule.txt",
                                 data_dir() / "examples" / "molecule_signature.txt");
  const auto blocks = read_constraints(data_dir() / "examples" / "molecule_constraints.txt",
                                       molecule.signature());
  CHECK(satisfies(molecule, blocks));
  const auto tiny = read_signature_file(data_dir() / "examples" / "tiny_signature.txt");
  const auto tiny_sig = resolve_signature(tiny, {});
  const auto rules = read_rules(data_dir() / "examples" / "tiny_rules.txt", *tiny_sig);
  CHECK(rules.size() == 3);
  CHECK(rules[2].weight == -1.0);
}

TEST_CASE("constraint and rule errors") {
  const auto sig = testing::smokers_signature(3);
  const auto path = scratch("c.txt");
  write_file(path, "exactly-one: fr\n");
  CHECK(parse_error_line([&] { read_constraints(path, *sig); }) == 1);
  write_file(path, "\nsome-of: sm\n");
  CHECK(parse_error_line([&] { read_constraints(path, *sig); }) == 2);
  std::istringstream rules("1.0 sm(x1)\nheavy sm(x1)\n");
  CHECK(parse_error_line([&] { parse_rules(rules, *sig); }) == 2);
  std::istringstream bad_formula("0.5 sm(x1) &\n");
  CHECK(parse_error_line([&] { parse_rules(bad_formula, *sig); }) == 1);
}

TEST_CASE("model files") {
  const auto sig = testing::smokers_signature(4);
  Rng rng(2);
  const World w = testing::random_world(sig, rng);
  ModelSpec spec;
  spec.k = 2;
  spec.hidden = {5, 3};
  spec.heads = 2;

  SUBCASE("symmetric model round-trips bit for bit") {
    auto model = make_model(*sig, spec, 3);
    model.indicators.push_back({Formula::parse("fr(x1, x2) -> fr(x2, x1)", *sig), 0.1});
    model.betas.push_back(1.0 / 3.0);
    const auto path = scratch("model.json");
    save_model(model, *sig, path);
    const auto back = load_model(path, *sig);
    CHECK(flatten_parameters(back) == flatten_parameters(model));
    CHECK(world_score(w, back) == world_score(w, model));
    CHECK(back.indicators[0].weight == 0.1);
    // Constant names are not part of a symmetric model's signature.
    const auto renamed = std::make_shared<const Signature>(
        std::vector<std::string>{"a", "b", "c", "d"}, sig->predicates());
    CHECK_NOTHROW(load_model(path, *renamed));
  }
  SUBCASE("embedding model round-trips its table and binds constants") {
    spec.embedding_dim = 3;
    const auto model = make_model(*sig, spec, 4);
    const auto back = deserialize_model(serialize_model(model, *sig), *sig);
    CHECK(back.embeddings->values == model.embeddings->values);
    CHECK(world_score(w, back) == world_score(w, model));
    const auto renamed = std::make_shared<const Signature>(
        std::vector<std::string>{"a", "b", "c", "d"}, sig->predicates());
    CHECK_THROWS_AS(deserialize_model(serialize_model(model, *sig), *renamed), ModelFormatError);
  }
  SUBCASE("tampering is refused") {
    const auto model = make_model(*sig, spec, 5);
    auto j = nlohmann::json::parse(serialize_model(model, *sig));
    auto hash = j["signature_hash"].get<std::string>();
    hash[0] = hash[0] == '0' ? '1' : '0';
    j["signature_hash"] = hash;
    CHECK_THROWS_AS(deserialize_model(j.dump(), *sig), ModelFormatError);
    j = nlohmann::json::parse(serialize_model(model, *sig));
    j["version"] = 2;
    CHECK_THROWS_AS(deserialize_model(j.dump(), *sig), ModelFormatError);
    j = nlohmann::json::parse(serialize_model(model, *sig));
    j["betas"].push_back(1.0);
    CHECK_THROWS_AS(deserialize_model(j.dump(), *sig), ModelFormatError);
    CHECK_THROWS_AS(deserialize_model("{not json", *sig), ModelFormatError);
    const auto other = testing::make_signature(4, {{"sm", 1}, {"fr", 2}, {"x", 1}});
    CHECK_THROWS_AS(deserialize_model(serialize_model(model, *sig), *other), ModelFormatError);
  }
}
