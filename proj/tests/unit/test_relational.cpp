#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <nmln/combinatorics.hpp>
#include <nmln/errors.hpp>
#include <nmln/relational.hpp>

#include "support.hpp"

using namespace nmln;
using nmln::testing::make_signature;
using nmln::testing::random_world;

namespace {

// fr/2 then sm/1, constants named like the running example.
SignaturePtr alice_bob_eve() {
  return std::make_shared<const Signature>(std::vector<std::string>{"Alice", "Bob", "Eve"},
                                           std::vector<Predicate>{{"fr", 2}, {"sm", 1}});
}

World example_world() {
  auto sig = alice_bob_eve();
  World w(sig);
  w.set(GroundAtom{1, 1, {0, 0}}, true);  // sm(Alice)
  w.set(GroundAtom{0, 2, {0, 1}}, true);  // fr(Alice, Bob)
  w.set(GroundAtom{0, 2, {1, 2}}, true);  // fr(Bob, Eve)
  return w;
}

std::vector<std::string> names(const Signature& sig, const std::vector<GroundAtom>& atoms) {
  std::vector<std::string> out;
  for (const auto& a : atoms) out.push_back(sig.format(a));
  return out;
}

}  // namespace

TEST_CASE("combinatorics basics") {
  CHECK(binomial(3, 2) == 3);
  CHECK(binomial(14, 3) == 364);
  CHECK(binomial(2, 3) == 0);
  CHECK(factorial(0) == 1);
  CHECK(factorial(5) == 120);
  const auto subsets = k_subsets(4, 2);
  REQUIRE(subsets.size() == 6);
  CHECK(subsets.front() == std::vector<int>{0, 1});
  CHECK(subsets.back() == std::vector<int>{2, 3});
  CHECK(std::is_sorted(subsets.begin(), subsets.end()));
  const auto& perms = permutations(3);
  REQUIRE(perms.size() == 6);
  CHECK(perms.front() == std::vector<int>{0, 1, 2});
  CHECK(perms.back() == std::vector<int>{2, 1, 0});
  CHECK(std::is_sorted(perms.begin(), perms.end()));
}

TEST_CASE("next_subset walks the same sequence as k_subsets") {
  for (int n = 1; n <= 7; ++n) {
    for (int k = 1; k <= n; ++k) {
      const auto all = k_subsets(n, k);
      std::vector<int> s(k);
      for (int i = 0; i < k; ++i) s[i] = i;
      std::size_t count = 0;
      do {
        REQUIRE(count < all.size());
        CHECK(s == all[count]);
        ++count;
      } while (next_subset(s, n));
      CHECK(count == binomial(n, k));
    }
  }
}

TEST_CASE("canonical atom order") {
  SUBCASE("fr/2, sm/1 over two constants") {
    auto sig = make_signature(2, {{"fr", 2}, {"sm", 1}});
    const std::vector<ConstantId> pool{0, 1};
    CHECK(names(*sig, canonical_atom_order(*sig, pool)) ==
          std::vector<std::string>{"fr(c0,c0)", "fr(c0,c1)", "fr(c1,c0)", "fr(c1,c1)", "sm(c0)",
                                   "sm(c1)"});
    const auto atoms = canonical_atom_order(*sig, pool);
    REQUIRE(atoms.size() == 6);
    CHECK(atoms[0] == GroundAtom{0, 2, {0, 0}});
    CHECK(atoms[1] == GroundAtom{0, 2, {0, 1}});
    CHECK(atoms[2] == GroundAtom{0, 2, {1, 0}});
    CHECK(atoms[3] == GroundAtom{0, 2, {1, 1}});
    CHECK(atoms[4] == GroundAtom{1, 1, {0, 0}});
    CHECK(atoms[5] == GroundAtom{1, 1, {1, 0}});
    for (std::size_t i = 0; i < atoms.size(); ++i) CHECK(sig->atom_index(atoms[i]) == i);
  }
  SUBCASE("single unary atom") {
    auto sig = make_signature(1, {{"sm", 1}});
    CHECK(sig->num_atoms() == 1);
    CHECK(sig->atom(0) == GroundAtom{0, 1, {0, 0}});
  }
  SUBCASE("fr/2 over three constants") {
    auto sig = make_signature(3, {{"fr", 2}});
    REQUIRE(sig->num_atoms() == 9);
    CHECK(sig->atom(0) == GroundAtom{0, 2, {0, 0}});
    CHECK(sig->atom(8) == GroundAtom{0, 2, {2, 2}});
  }
}

TEST_CASE("signature lookups and errors") {
  auto sig = alice_bob_eve();
  CHECK(sig->find_constant("Bob") == 1);
  CHECK_FALSE(sig->find_constant("Zed").has_value());
  CHECK(sig->find_predicate("sm") == 1);
  CHECK(sig->code_length(2) == 6);
  CHECK(sig->code_length(3) == 12);
  CHECK(sig->format(GroundAtom{0, 2, {0, 1}}) == "fr(Alice,Bob)");
  CHECK_THROWS_AS(sig->atom_index(GroundAtom{0, 2, {0, 7}}), SignatureMismatch);
  CHECK_THROWS_AS(sig->atom_index(GroundAtom{5, 1, {0, 0}}), SignatureMismatch);
  CHECK_THROWS(Signature({"a", "a"}, {{"p", 1}}));
  CHECK_THROWS(Signature({"a"}, {{"p", 3}}));
  // Constants only enter the hash on request.
  auto renamed = make_signature(3, {{"fr", 2}, {"sm", 1}});
  CHECK(sig->hash(false) == renamed->hash(false));
  CHECK(sig->hash(true) != renamed->hash(true));
}

TEST_CASE("World::from_index and true_atoms") {
  auto sig = make_signature(2, {{"sm", 1}, {"fr", 2}});
  const World w = World::from_index(sig, 0b100101);
  CHECK(w.count_true() == 3);
  CHECK(w.true_atoms() == std::vector<AtomIndex>{0, 2, 5});
}

TEST_CASE("restrict") {
  SUBCASE("running example") {
    const World w = example_world();
    const std::vector<ConstantId> s{0, 1};
    const Fragment f = restrict(w, s);
    CHECK(names(w.signature(), f.true_atoms()) ==
          std::vector<std::string>{"fr(Alice,Bob)", "sm(Alice)"});
  }
  SUBCASE("empty world") {
    World w(alice_bob_eve());
    const std::vector<ConstantId> s{0, 2};
    CHECK(restrict(w, s).true_atoms().empty());
  }
  SUBCASE("full world keeps 2 unary + 4 binary atoms") {
    World w(alice_bob_eve());
    for (AtomIndex a = 0; a < w.size(); ++a) w.set(a, true);
    const std::vector<ConstantId> s{1, 2};
    CHECK(restrict(w, s).true_atoms().size() == 6);
  }
}

TEST_CASE("enumerate_fragments counts") {
  Rng rng(3);
  auto sig3 = make_signature(3, {{"sm", 1}, {"fr", 2}});
  const World w3 = random_world(sig3, rng);
  CHECK(enumerate_fragments(w3, 2).size() == 3);
  const auto whole = enumerate_fragments(w3, 3);
  REQUIRE(whole.size() == 1);
  CHECK(whole.front().values == std::vector<std::uint8_t>(w3.bits().begin(), w3.bits().end()));
  auto sig14 = make_signature(14, {{"r", 2}});
  const auto fragments = enumerate_fragments(World(sig14), 3);
  CHECK(fragments.size() == 364);
  std::set<std::vector<ConstantId>> distinct;
  for (const auto& f : fragments) distinct.insert(f.constants);
  CHECK(distinct.size() == 364);
}

TEST_CASE("anonymize the running example") {
  const World w = example_world();
  const std::vector<ConstantId> s{0, 1};
  const auto codes = anonymize(restrict(w, s));
  REQUIRE(codes.size() == 2);
  CHECK(codes[0].bits == std::vector<std::uint8_t>{0, 1, 0, 0, 1, 0});
  CHECK(codes[1].bits == std::vector<std::uint8_t>{0, 0, 1, 0, 0, 1});
}

TEST_CASE("anonymize: symmetric fragment gives identical codes") {
  World w(make_signature(3, {{"sm", 1}, {"fr", 2}}));
  for (AtomIndex a = 0; a < w.size(); ++a) w.set(a, true);
  const std::vector<ConstantId> s{0, 1, 2};
  const auto codes = anonymize(restrict(w, s));
  REQUIRE(codes.size() == 6);
  for (const auto& c : codes) CHECK(c.bits == codes.front().bits);
}

TEST_CASE("property: decode inverts every anonymization") {
  Rng rng(11);
  auto sig = make_signature(5, {{"sm", 1}, {"fr", 2}, {"q", 1}});
  for (int trial = 0; trial < 20; ++trial) {
    const World w = random_world(sig, rng);
    for (int k = 1; k <= 3; ++k) {
      for (const auto& f : enumerate_fragments(w, k)) {
        const auto codes = anonymize(f);
        REQUIRE(codes.size() == factorial(k));
        for (const auto& code : codes) {
          const Fragment back = decode(code, sig);
          CHECK(back.constants == f.constants);
          CHECK(back.values == f.values);
          std::vector<std::uint8_t> direct(sig->code_length(k));
          encode(w, code.from_anon, direct);
          CHECK(direct == code.bits);
          std::uint64_t packed = 0;
          for (std::size_t i = 0; i < direct.size(); ++i) {
            packed |= static_cast<std::uint64_t>(direct[i]) << i;
          }
          CHECK(encode_packed(w, code.from_anon) == packed);
        }
      }
    }
  }
}

TEST_CASE("isomorphic") {
  auto sig = make_signature(2, {{"fr", 2}, {"sm", 1}});
  World a(sig), b(sig);
  a.set(GroundAtom{1, 1, {0, 0}}, true);
  a.set(GroundAtom{0, 2, {0, 1}}, true);
  b.set(GroundAtom{1, 1, {1, 0}}, true);
  b.set(GroundAtom{0, 2, {1, 0}}, true);
  const std::vector<ConstantId> s{0, 1};
  CHECK(isomorphic(restrict(a, s), restrict(b, s)));

  World one(sig), two(sig);
  one.set(GroundAtom{1, 1, {0, 0}}, true);
  two.set(GroundAtom{1, 1, {0, 0}}, true);
  two.set(GroundAtom{1, 1, {1, 0}}, true);
  CHECK_FALSE(isomorphic(restrict(one, s), restrict(two, s)));
}

TEST_CASE("property: isomorphic agrees with a renaming oracle and is an equivalence") {
  Rng rng(5);
  for (int k = 1; k <= 3; ++k) {
    auto sig = make_signature(5, {{"p", 1}, {"r", 2}});
    std::vector<Fragment> pool;
    for (int i = 0; i < 4; ++i) {
      const World w = random_world(sig, rng, 0.4);
      for (const auto& f : enumerate_fragments(w, k)) pool.push_back(f);
    }
    pool.resize(std::min<std::size_t>(pool.size(), 24));
    // Oracle: the sets of anonymized codes coincide.
    auto code_set = [](const Fragment& f) {
      std::set<std::vector<std::uint8_t>> s;
      for (const auto& c : anonymize(f)) s.insert(c.bits);
      return s;
    };
    std::vector<std::set<std::vector<std::uint8_t>>> sets;
    for (const auto& f : pool) sets.push_back(code_set(f));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CHECK(isomorphic(pool[i], pool[i]));
      for (std::size_t j = 0; j < pool.size(); ++j) {
        const bool iso = isomorphic(pool[i], pool[j]);
        CHECK(iso == (sets[i] == sets[j]));
        CHECK(iso == isomorphic(pool[j], pool[i]));
        if (!iso) continue;
        for (std::size_t m = 0; m < pool.size(); ++m) {
          if (isomorphic(pool[j], pool[m])) CHECK(isomorphic(pool[i], pool[m]));
        }
      }
    }
  }
}
