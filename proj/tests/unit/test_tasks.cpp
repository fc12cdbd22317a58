#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nmln/errors.hpp>
#include <nmln/oracle.hpp>
#include <nmln/tasks.hpp>

#include "support.hpp"

using namespace nmln;
using nmln::testing::make_signature;
using nmln::testing::permute_world;
using nmln::testing::random_permutation;
using nmln::testing::random_world;
using nmln::testing::smokers_signature;

namespace {

PotentialModel zero_model(const Signature& sig, int k) {
  ModelSpec spec;
  spec.k = k;
  spec.hidden = {3};
  auto model = make_model(sig, spec, 1);
  std::fill(model.betas.begin(), model.betas.end(), 0.0);
  return model;
}

RankResult result_with_rank(double rank) {
  RankResult r;
  r.rank = rank;
  r.reciprocal_rank = 1.0 / rank;
  return r;
}

}  // namespace

TEST_CASE("corruptions") {
  const auto sig = make_signature(3, {{"r", 2}});  // constants c0, c1, c2 = a, b, c
  World kb(sig);
  const GroundAtom test{0, 2, {0, 1}};
  SUBCASE("replace each argument in turn, in constant order") {
    const auto c = corruptions(test, kb);
    const std::vector<GroundAtom> expected{
        {0, 2, {1, 1}}, {0, 2, {2, 1}}, {0, 2, {0, 0}}, {0, 2, {0, 2}}};
    CHECK(c == expected);
  }
  SUBCASE("known facts are skipped") {
    for (const auto& a : corruptions(test, kb)) kb.set(a, true);
    CHECK(corruptions(test, kb).empty());
  }
  SUBCASE("bound on a 14-constant domain") {
    const auto big = make_signature(14, {{"r", 2}, {"s", 2}});
    Rng rng(1);
    const World w = random_world(big, rng, 0.2);
    const GroundAtom t{1, 2, {3, 7}};
    const auto c = corruptions(t, w);
    CHECK(c.size() <= 26);
    for (const auto& a : c) {
      CHECK_FALSE(w.get(a));
      CHECK_FALSE(a == t);
      CHECK(a.predicate == 1);
    }
  }
  SUBCASE("unary atoms are rejected") {
    const auto s = smokers_signature(3);
    CHECK_THROWS_AS(corruptions(GroundAtom{0, 1, {0, 0}}, World(s)), InvalidArgument);
  }
}

TEST_CASE("rank_from_scores") {
  const GroundAtom t{0, 2, {0, 1}};
  const std::vector<double> others{0.5, 0.2};
  auto r = rank_from_scores(t, 0.9, others);
  CHECK(r.rank == 1.0);
  CHECK(r.reciprocal_rank == 1.0);
  CHECK(r.corruption_count == 2);
  const std::vector<double> higher{0.9, 0.8, 0.7, 0.6};
  CHECK(rank_from_scores(t, 0.1, higher).rank == 5.0);
  // Ties count half.
  const std::vector<double> tied{0.5, 0.5, 0.9};
  CHECK(rank_from_scores(t, 0.5, tied).rank == 3.0);
}

TEST_CASE("property: rank bounds and invariance to monotone transforms") {
  Rng rng(2);
  const GroundAtom t{0, 2, {0, 1}};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> others(1 + uniform_below(rng, 20));
    for (auto& s : others) s = std::round(uniform01(rng) * 10.0) / 10.0;
    const double gold = std::round(uniform01(rng) * 10.0) / 10.0;
    const auto r = rank_from_scores(t, gold, others);
    CHECK(r.rank >= 1.0);
    CHECK(r.rank <= others.size() + 1.0);
    std::vector<double> transformed;
    for (double s : others) transformed.push_back(std::exp(3.0 * s) - 7.0);
    CHECK(rank_from_scores(t, std::exp(3.0 * gold) - 7.0, transformed).rank == r.rank);
  }
}

TEST_CASE("kbc metrics") {
  const std::vector<RankResult> results{result_with_rank(1), result_with_rank(2),
                                        result_with_rank(4)};
  const std::vector<int> cuts{1, 3, 10};
  const auto m = kbc_metrics(results, cuts);
  CHECK(m.mrr == doctest::Approx(0.58333333333).epsilon(1e-10));
  CHECK(m.hits.at(1) == doctest::Approx(1.0 / 3));
  CHECK(m.hits.at(3) == doctest::Approx(2.0 / 3));
  CHECK(m.hits.at(10) == 1.0);
  const std::vector<RankResult> perfect(4, result_with_rank(1));
  const auto p = kbc_metrics(perfect, cuts);
  CHECK(p.mrr == 1.0);
  for (const auto& [cut, h] : p.hits) CHECK(h == 1.0);
  CHECK_THROWS_AS(kbc_metrics({}, cuts), InvalidArgument);
}

TEST_CASE("query marginals") {
  const auto sig = smokers_signature(3);
  SUBCASE("zero model gives one half and leaves evidence alone") {
    const auto model = zero_model(*sig, 2);
    Rng rng(3);
    const World evidence = random_world(sig, rng);
    const std::vector<AtomIndex> query{0, 4, 7};
    MarginalConfig mc;
    mc.burn_in = 10;
    mc.sweeps = 20000;
    mc.seed = 5;
    for (double p : query_marginals(model, evidence, query, mc)) CHECK(std::abs(p - 0.5) < 0.02);
  }
  SUBCASE("clamped marginals match conditional enumeration") {
    ModelSpec spec;
    spec.k = 2;
    spec.hidden = {4};
    auto model = make_model(*sig, spec, 9);
    Rng rng(4);
    const World evidence = random_world(sig, rng);
    const std::vector<AtomIndex> query{1, 5, 6};
    // Exact P(q = 1 | evidence) over the 8 completions.
    std::vector<double> exact(query.size(), 0.0);
    double z = 0.0;
    for (int m = 0; m < 8; ++m) {
      World w = evidence;
      for (int j = 0; j < 3; ++j) w.set(query[j], (m >> j) & 1);
      const double p = std::exp(world_score(w, model));
      z += p;
      for (int j = 0; j < 3; ++j) exact[j] += ((m >> j) & 1) * p;
    }
    MarginalConfig mc;
    mc.sweeps = 40000;
    mc.seed = 6;
    const auto est = query_marginals(model, evidence, query, mc);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(est[j] - exact[j] / z) < 0.02);
  }
  SUBCASE("argument checks") {
    const auto model = zero_model(*sig, 2);
    MarginalConfig mc;
    mc.sweeps = 0;
    const std::vector<AtomIndex> query{0};
    CHECK_THROWS_AS(query_marginals(model, World(sig), query, mc), InvalidArgument);
  }
}

TEST_CASE("a planted symmetric relation ranks the reverse edge first") {
  const auto sig = make_signature(4, {{"fr", 2}});
  World kb(sig);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {2, 3}, {3, 2}, {1, 2}}) {
    kb.set(GroundAtom{0, 2, {a, b}}, true);
  }
  PotentialModel model;
  model.k = 2;
  model.indicators.push_back({Formula::parse("fr(x1, x2) -> fr(x2, x1)", *sig), 1.0});
  model.betas.push_back(8.0);
  model.indicators.push_back({Formula::parse("fr(x1, x2)", *sig), 1.0});
  model.betas.push_back(-4.0);
  const GroundAtom test{0, 2, {2, 1}};
  MarginalConfig mc;
  mc.sweeps = 2000;
  mc.seed = 1;
  const auto results = rank_all(std::vector<GroundAtom>{test}, model, kb, mc, 1);
  CHECK(results.front().rank == 1.0);
  // Independent of the worker count.
  const auto threaded = rank_all(std::vector<GroundAtom>{test, {0, 2, {0, 3}}}, model, kb, mc, 2);
  const auto serial = rank_all(std::vector<GroundAtom>{test, {0, 2, {0, 3}}}, model, kb, mc, 1);
  for (std::size_t i = 0; i < serial.size(); ++i) CHECK(threaded[i].rank == serial[i].rank);
}

TEST_CASE("threshold classification") {
  const GroundAtom r{0, 2, {0, 1}}, s{1, 2, {0, 1}};
  SUBCASE("separable scores") {
    const std::vector<ScoredTriple> valid{{r, 0.9, true}, {r, 0.2, false}, {s, 0.4, true},
                                          {s, 0.1, false}};
    const auto policy = fit_thresholds(valid);
    CHECK(classification_accuracy(valid, policy) == 1.0);
    CHECK(policy.threshold(0) == doctest::Approx(0.55));
    CHECK(policy.threshold(1) == doctest::Approx(0.25));
    CHECK(policy.threshold(7) == policy.global);
  }
  SUBCASE("constant scores fall back to the majority class") {
    const std::vector<ScoredTriple> valid{{r, 0.5, true}, {r, 0.5, true}, {r, 0.5, false}};
    CHECK(classification_accuracy(valid, fit_thresholds(valid)) == doctest::Approx(2.0 / 3));
  }
  CHECK_THROWS_AS(fit_thresholds({}), InvalidArgument);
}

TEST_CASE("canonical keys") {
  const auto sig = smokers_signature(4);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const World w = random_world(sig, rng);
    CHECK(canonical_key(w) == canonical_key(permute_world(w, random_permutation(4, rng))));
  }
  World one(sig), other(sig);
  one.set(GroundAtom{0, 1, {0, 0}}, true);
  other.set(GroundAtom{0, 1, {0, 0}}, true);
  other.set(GroundAtom{0, 1, {1, 0}}, true);
  CHECK(canonical_key(one) != canonical_key(other));
  CHECK_THROWS_AS(canonical_key(World(smokers_signature(9))), DomainTooLarge);
}

TEST_CASE("sample log") {
  const auto sig = smokers_signature(2);
  World a(sig), b(sig);
  a.set(GroundAtom{0, 1, {0, 0}}, true);
  b.set(GroundAtom{0, 1, {1, 0}}, true);
  SampleLog log(2);
  log.add(a, 1);
  log.add(b, 2);  // isomorphic to a
  log.add(World(sig), 3);
  log.add(World(sig), 4);
  CHECK(log.kept() == 4);
  REQUIRE(log.entries().size() == 2);
  const auto top = log.top(5);
  CHECK(top[0].count == 2);
  CHECK(top[0].first_sweep == 1);  // tie broken by first appearance
  CHECK(top[1].count == 2);
  const auto recent = log.top(5, true);
  REQUIRE(recent.size() == 1);
  CHECK(recent[0].first_sweep == 3);
  CHECK(log.top(1).size() == 1);
}

TEST_CASE("generation statistics") {
  SUBCASE("zero model over two atoms is uniform over four structures") {
    const auto sig = make_signature(1, {{"p", 1}, {"q", 1}});
    const auto model = zero_model(*sig, 1);
    SampleLog log;
    sample_generations(model, sig, 10, 20000, 3, log);
    REQUIRE(log.entries().size() == 4);
    for (const auto& e : log.entries()) CHECK(std::abs(e.count / 20000.0 - 0.25) < 0.02);
  }
  SUBCASE("a concentrated model yields one structure") {
    const auto sig = smokers_signature(3);
    PotentialModel model;
    model.k = 2;
    model.indicators.push_back({Formula::parse("sm(x1) & !fr(x1, x1)", *sig), 1.0});
    model.betas.push_back(300.0);
    model.indicators.push_back({Formula::parse("!fr(x1, x2)", *sig), 1.0});
    model.betas.push_back(300.0);
    SampleLog log;
    sample_generations(model, sig, 20, 500, 4, log);
    CHECK(log.top(1).front().count == 500);
  }
  SUBCASE("property: counts do not depend on constant names") {
    const auto sig = smokers_signature(4);
    Rng rng(8);
    SampleLog plain, renamed;
    for (int i = 0; i < 50; ++i) {
      const World w = random_world(sig, rng, 0.15);
      plain.add(w, i);
      renamed.add(permute_world(w, random_permutation(4, rng)), i);
    }
    const auto a = plain.top(10), b = renamed.top(10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].key == b[i].key);
      CHECK(a[i].count == b[i].count);
    }
  }
}

TEST_CASE("snapshot hook collects from the requested epoch") {
  const auto sig = smokers_signature(3);
  TrainConfig config;
  config.chains = 2;
  config.seed = 1;
  Trainer trainer(zero_model(*sig, 2), {World(sig)}, config);
  SampleLog log;
  trainer.set_snapshot_hook(collect_generations(log, 2));
  for (int e = 0; e < 5; ++e) trainer.grad_step();
  CHECK(log.kept() == 3 * 2);
}

TEST_CASE("pseudo log-likelihood of a zero model") {
  const auto sig = smokers_signature(3);
  Rng rng(9);
  CHECK(pseudo_log_likelihood(zero_model(*sig, 2), random_world(sig, rng)) ==
        doctest::Approx(12 * std::log(0.5)));
}

TEST_CASE("skip-bond augmentation") {
  const auto sig = make_signature(3, {{"single", 2}, {"double", 2}, {"skip", 2}});
  auto pairs = [&](const World& w) {
    std::set<std::pair<int, int>> out;
    for (int x = 0; x < 3; ++x) {
      for (int z = 0; z < 3; ++z) {
        if (w.get(GroundAtom{2, 2, {x, z}})) out.insert({x, z});
      }
    }
    return out;
  };
  const std::vector<PredicateId> bonds{0, 1};
  SUBCASE("chain") {
    World w(sig);
    w.set(GroundAtom{0, 2, {0, 1}}, true);
    w.set(GroundAtom{0, 2, {1, 2}}, true);
    CHECK(pairs(skip_bond_augment(w, bonds, 2)) == std::set<std::pair<int, int>>{{0, 2}, {2, 0}});
  }
  SUBCASE("no bonds") {
    World w(sig);
    CHECK(skip_bond_augment(w, bonds, 2) == w);
  }
  SUBCASE("triangle of mixed bonds") {
    World w(sig);
    w.set(GroundAtom{0, 2, {0, 1}}, true);
    w.set(GroundAtom{1, 2, {1, 2}}, true);
    w.set(GroundAtom{0, 2, {0, 2}}, true);
    CHECK(pairs(skip_bond_augment(w, bonds, 2)).size() == 6);
  }
  World w(sig);
  CHECK_THROWS_AS(skip_bond_augment(w, bonds, 7), InvalidArgument);
}
