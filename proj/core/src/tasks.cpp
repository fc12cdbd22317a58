#include "nmln/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "nmln/errors.hpp"

namespace nmln {

std::vector<GroundAtom> corruptions(const GroundAtom& test, const World& kb) {
  if (test.arity != 2) throw InvalidArgument("corruptions: test atom must be binary");
  const int n = static_cast<int>(kb.signature().num_constants());
  std::vector<GroundAtom> out;
  auto consider = [&](ConstantId a, ConstantId b) {
    GroundAtom atom{test.predicate, 2, {a, b}};
    if (atom == test || kb.get(atom)) return;
    out.push_back(atom);
  };
  for (ConstantId c = 0; c < n; ++c) consider(c, test.args[1]);
  for (ConstantId c = 0; c < n; ++c) consider(test.args[0], c);
  return out;
}

std::vector<double> query_marginals(const PotentialModel& model, const World& evidence,
                                    std::span<const AtomIndex> query, const MarginalConfig& config) {
  if (config.burn_in < 0 || config.sweeps < 1) {
    throw InvalidArgument("query_marginals: need burn_in >= 0 and sweeps >= 1");
  }
  ChainState chain{evidence, config.seed, 0};
  for (AtomIndex a : query) chain.world.set(a, false);
  GibbsSampler sampler(model, evidence.signature_ptr(), 1);
  for (int s = 0; s < config.burn_in; ++s) sampler.sweep_atoms(chain, query);
  std::vector<double> counts(query.size(), 0.0);
  for (int s = 0; s < config.sweeps; ++s) {
    sampler.sweep_atoms(chain, query);
    for (std::size_t i = 0; i < query.size(); ++i) counts[i] += chain.world.get(query[i]) ? 1.0 : 0.0;
  }
  for (auto& c : counts) c /= static_cast<double>(config.sweeps);
  return counts;
}

RankResult rank_from_scores(const GroundAtom& test, double gold, std::span<const double> others) {
  std::size_t higher = 0;
  std::size_t ties = 0;
  for (double s : others) {
    if (s > gold) {
      ++higher;
    } else if (s == gold) {
      ++ties;
    }
  }
  RankResult r;
  r.test = test;
  r.corruption_count = others.size();
  r.rank = 1.0 + static_cast<double>(higher) + static_cast<double>(ties) / 2.0;
  r.reciprocal_rank = 1.0 / r.rank;
  return r;
}

RankResult rank_fact(const GroundAtom& test, std::span<const GroundAtom> corrupted,
                     const PotentialModel& model, const World& evidence,
                     const MarginalConfig& config) {
  const Signature& sig = evidence.signature();
  std::vector<AtomIndex> query;
  query.reserve(corrupted.size() + 1);
  query.push_back(sig.atom_index(test));
  for (const auto& c : corrupted) query.push_back(sig.atom_index(c));
  const auto marginals = query_marginals(model, evidence, query, config);
  return rank_from_scores(test, marginals.front(),
                          std::span<const double>(marginals).subspan(1));
}

std::vector<RankResult> rank_all(std::span<const GroundAtom> tests, const PotentialModel& model,
                                 const World& evidence, const MarginalConfig& config, int threads) {
  std::vector<RankResult> results(tests.size());
  const std::size_t workers =
      static_cast<std::size_t>(std::max(1, threads > 0 ? threads : default_thread_count()));
  auto work = [&](std::size_t worker) {
    for (std::size_t i = worker; i < tests.size(); i += workers) {
      MarginalConfig local = config;
      local.seed = derive_seed({config.seed, 0x7a7c, i});
      const auto corrupted = corruptions(tests[i], evidence);
      results[i] = rank_fact(tests[i], corrupted, model, evidence, local);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work, t);
    work(0);
  }
  return results;
}

KbcMetrics kbc_metrics(std::span<const RankResult> results, std::span<const int> m_values) {
  if (results.empty()) throw InvalidArgument("kbc_metrics: no results");
  KbcMetrics m;
  for (const auto& r : results) m.mrr += r.reciprocal_rank;
  m.mrr /= static_cast<double>(results.size());
  for (int cut : m_values) {
    std::size_t hit = 0;
    for (const auto& r : results) {
      if (r.rank <= cut) ++hit;
    }
    m.hits[cut] = static_cast<double>(hit) / static_cast<double>(results.size());
  }
  return m;
}

double ThresholdPolicy::threshold(PredicateId relation) const {
  const auto it = per_relation.find(relation);
  return it == per_relation.end() ? global : it->second;
}

namespace {

// Accuracy-maximizing threshold among midpoints of distinct scores and the two
// outer cuts; the smallest best threshold wins.
double best_threshold(std::vector<std::pair<double, bool>> scored) {
  std::sort(scored.begin(), scored.end());
  std::vector<double> candidates;
  candidates.push_back(scored.front().first - 1.0);
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].first != scored[i - 1].first) {
      candidates.push_back(0.5 * (scored[i].first + scored[i - 1].first));
    }
  }
  candidates.push_back(scored.back().first + 1.0);
  double best = candidates.front();
  std::size_t best_correct = 0;
  for (double t : candidates) {
    std::size_t correct = 0;
    for (const auto& [s, label] : scored) {
      if ((s > t) == label) ++correct;
    }
    if (correct > best_correct) {
      best_correct = correct;
      best = t;
    }
  }
  return best;
}

}  // namespace

ThresholdPolicy fit_thresholds(std::span<const ScoredTriple> validation) {
  if (validation.empty()) throw InvalidArgument("fit_thresholds: empty validation set");
  ThresholdPolicy policy;
  std::map<PredicateId, std::vector<std::pair<double, bool>>> by_relation;
  std::vector<std::pair<double, bool>> all;
  for (const auto& t : validation) {
    by_relation[t.atom.predicate].emplace_back(t.score, t.label);
    all.emplace_back(t.score, t.label);
  }
  policy.global = best_threshold(std::move(all));
  for (auto& [rel, scored] : by_relation) policy.per_relation[rel] = best_threshold(std::move(scored));
  return policy;
}

double classification_accuracy(std::span<const ScoredTriple> test, const ThresholdPolicy& policy) {
  if (test.empty()) throw InvalidArgument("classification_accuracy: empty test set");
  std::size_t correct = 0;
  for (const auto& t : test) {
    if ((t.score > policy.threshold(t.atom.predicate)) == t.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::string canonical_key(const World& world) {
  const Signature& sig = world.signature();
  const std::size_t n = sig.num_constants();
  if (n > kMaxCanonicalConstants) {
    throw DomainTooLarge("canonical keys are limited to " + std::to_string(kMaxCanonicalConstants) +
                         " constants");
  }
  std::vector<ConstantId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint8_t> code(sig.code_length(static_cast<int>(n)));
  std::vector<std::uint8_t> best;
  do {
    encode(world, order, code);
    if (best.empty() || code < best) best = code;
  } while (std::next_permutation(order.begin(), order.end()));
  std::string key(best.size(), '0');
  for (std::size_t i = 0; i < best.size(); ++i) key[i] = best[i] ? '1' : '0';
  return key;
}

void SampleLog::add(const World& world, std::uint64_t sweep) {
  auto key = canonical_key(world);
  auto [it, inserted] = index_.try_emplace(key, entries_.size());
  if (inserted) entries_.push_back(Entry{std::move(key), world, 0, sweep});
  ++entries_[it->second].count;
  ++kept_;
  sweeps_.push_back(sweep);
  if (window_ > 0) {
    recent_.push_back(it->second);
    if (recent_.size() > window_) recent_.pop_front();
  }
}

std::vector<SampleLog::Entry> SampleLog::top(std::size_t n, bool last_window) const {
  std::vector<Entry> ranked = entries_;
  if (last_window && window_ > 0) {
    for (auto& e : ranked) e.count = 0;
    for (std::size_t i : recent_) ++ranked[i].count;
    std::erase_if(ranked, [](const Entry& e) { return e.count == 0; });
  }
  // entries_ is in first-appearance order, so a stable sort breaks ties by it.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Entry& a, const Entry& b) { return a.count > b.count; });
  if (ranked.size() > n) ranked.erase(ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end());
  return ranked;
}

Trainer::SnapshotHook collect_generations(SampleLog& log, int first_epoch) {
  return [&log, first_epoch](const ChainState& chain, int epoch) {
    if (epoch >= first_epoch) log.add(chain.world, chain.sweep);
  };
}

void sample_generations(const PotentialModel& model, SignaturePtr signature, int burn_in,
                        int sweeps, std::uint64_t seed, SampleLog& log,
                        std::span<const ExclusionBlock> constraints) {
  ChainState chain{World(signature), seed, 0};
  GibbsSampler sampler(model, signature, 1);
  auto step = [&] {
    if (constraints.empty()) {
      sampler.sweep_sequential(chain);
    } else {
      sampler.sweep_constrained(chain, constraints);
    }
  };
  for (int s = 0; s < burn_in; ++s) step();
  for (int s = 0; s < sweeps; ++s) {
    step();
    log.add(chain.world, chain.sweep);
  }
}

double pseudo_log_likelihood(const PotentialModel& model, const World& world) {
  Scorer scorer(model, world.signature_ptr());
  World scratch = world;
  double total = 0.0;
  for (AtomIndex a = 0; a < scratch.size(); ++a) {
    const double logit = scorer.conditional_logit(scratch, a);
    const double signed_logit = scratch.get(a) ? logit : -logit;
    // log sigmoid(x), stable for large |x|.
    total += signed_logit >= 0 ? -std::log1p(std::exp(-signed_logit))
                               : signed_logit - std::log1p(std::exp(signed_logit));
  }
  return total;
}

World skip_bond_augment(const World& world, std::span<const PredicateId> bonds, PredicateId skip) {
  const Signature& sig = world.signature();
  if (skip < 0 || static_cast<std::size_t>(skip) >= sig.num_predicates() ||
      sig.predicate(skip).arity != 2) {
    throw InvalidArgument("skip_bond_augment: missing binary skip-bond predicate");
  }
  for (PredicateId b : bonds) {
    if (b < 0 || static_cast<std::size_t>(b) >= sig.num_predicates() || sig.predicate(b).arity != 2) {
      throw InvalidArgument("skip_bond_augment: bond predicates must be binary");
    }
  }
  const int n = static_cast<int>(sig.num_constants());
  auto bonded = [&](ConstantId x, ConstantId y) {
    for (PredicateId b : bonds) {
      if (world.get(GroundAtom{b, 2, {x, y}}) || world.get(GroundAtom{b, 2, {y, x}})) return true;
    }
    return false;
  };
  World out = world;
  for (ConstantId y = 0; y < n; ++y) {
    for (ConstantId x = 0; x < n; ++x) {
      if (x == y || !bonded(x, y)) continue;
      for (ConstantId z = 0; z < n; ++z) {
        if (z == x || z == y || !bonded(y, z)) continue;
        out.set(GroundAtom{skip, 2, {x, z}}, true);
      }
    }
  }
  return out;
}

}  // namespace nmln
