#include "nmln/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "nmln/combinatorics.hpp"
#include "nmln/errors.hpp"

namespace nmln {

namespace {

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -INFINITY;
  const double top = *std::max_element(xs.begin(), xs.end());
  double total = 0.0;
  for (double x : xs) total += std::exp(x - top);
  return top + std::log(total);
}

void check_size(const Signature& sig, std::size_t max_atoms) {
  if (sig.num_atoms() > max_atoms || sig.num_atoms() > 40) {
    throw DomainTooLarge("exact enumeration over " + std::to_string(sig.num_atoms()) +
                         " atoms exceeds the cap of " + std::to_string(max_atoms));
  }
}

}  // namespace

WorldEnumeration::WorldEnumeration(SignaturePtr signature, std::size_t max_atoms)
    : signature_(std::move(signature)) {
  check_size(*signature_, max_atoms);
}

double ExactDistribution::probability(std::size_t i) const { return std::exp(scores[i] - log_z); }

std::vector<double> ExactDistribution::probabilities() const {
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = probability(i);
  return p;
}

ExactDistribution exact_distribution(const PotentialModel& model, SignaturePtr signature,
                                     const OracleOptions& options) {
  WorldEnumeration all(signature, options.max_atoms);
  ExactDistribution dist;
  dist.signature = signature;
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    if (options.constraints.empty() || satisfies(all.world(i), options.constraints)) {
      dist.worlds.push_back(i);
    }
  }
  if (dist.worlds.empty()) throw InvalidArgument("oracle: no world satisfies the constraints");
  dist.scores.resize(dist.worlds.size());

  // Fixed chunking; each slot is written by exactly one worker, so the result
  // does not depend on the thread count.
  const std::size_t threads = static_cast<std::size_t>(default_thread_count());
  auto work = [&](std::size_t worker) {
    Scorer scorer(model, signature);
    for (std::size_t i = worker; i < dist.worlds.size(); i += threads) {
      dist.scores[i] = scorer.world_score(all.world(dist.worlds[i]));
    }
  };
  if (threads > 1 && dist.worlds.size() > 256) {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work, t);
    work(0);
  } else {
    Scorer scorer(model, signature);
    for (std::size_t i = 0; i < dist.worlds.size(); ++i) {
      dist.scores[i] = scorer.world_score(all.world(dist.worlds[i]));
    }
  }
  dist.log_z = log_sum_exp(dist.scores);
  if (!std::isfinite(dist.log_z)) throw NumericError("oracle: non-finite log partition function");
  return dist;
}

double partition(const PotentialModel& model, SignaturePtr signature, const OracleOptions& options) {
  return exact_distribution(model, std::move(signature), options).log_z;
}

std::vector<double> exact_marginals(const PotentialModel& model, SignaturePtr signature,
                                    const OracleOptions& options) {
  const auto dist = exact_distribution(model, signature, options);
  const std::size_t atoms = signature->num_atoms();
  std::vector<double> marginals(atoms, 0.0);
  for (std::size_t i = 0; i < dist.worlds.size(); ++i) {
    const double p = dist.probability(i);
    const std::uint64_t w = dist.worlds[i];
    for (std::size_t a = 0; a < atoms; ++a) {
      if ((w >> a) & 1U) marginals[a] += p;
    }
  }
  return marginals;
}

std::vector<double> exact_expected_potentials(const PotentialModel& model, SignaturePtr signature,
                                              const OracleOptions& options) {
  const auto dist = exact_distribution(model, signature, options);
  Scorer scorer(model, signature);
  std::vector<double> expected(model.num_potentials(), 0.0);
  for (std::size_t i = 0; i < dist.worlds.size(); ++i) {
    const double p = dist.probability(i);
    const auto phi = scorer.global_potentials(World::from_index(signature, dist.worlds[i]));
    for (std::size_t j = 0; j < expected.size(); ++j) expected[j] += p * phi[j];
  }
  return expected;
}

double exact_log_likelihood(const PotentialModel& model, std::span<const World> data,
                            const OracleOptions& options) {
  if (data.empty()) throw InvalidArgument("exact_log_likelihood: no data");
  const double log_z = partition(model, data.front().signature_ptr(), options);
  Scorer scorer(model, data.front().signature_ptr());
  double total = 0.0;
  for (const auto& w : data) total += scorer.world_score(w) - log_z;
  return total / static_cast<double>(data.size());
}

double subset_satisfaction_fraction(const Formula& formula, int k, const World& world) {
  const Signature& sig = world.signature();
  const int n = static_cast<int>(sig.num_constants());
  if (k < 1 || k > n) throw InvalidArgument("subset_satisfaction_fraction: need 1 <= k <= n");
  if (formula.num_variables() > k) throw InvalidArgument("formula has more variables than k");

  std::size_t satisfied = 0;
  std::size_t total = 0;
  std::vector<ConstantId> assignment(k);
  std::vector<bool> taken;
  for (const auto& subset : k_subsets(n, k)) {
    // Every bijection {x1..xk} -> subset, by depth-first assignment.
    taken.assign(k, false);
    std::function<void(int)> assign = [&](int var) {
      if (var == k) {
        ++total;
        const bool holds = formula.evaluate([&](PredicateId p, std::span<const int> vars) {
          GroundAtom atom;
          atom.predicate = p;
          atom.arity = static_cast<int>(vars.size());
          for (int i = 0; i < atom.arity; ++i) atom.args[i] = assignment[vars[i]];
          return world.get(atom);
        });
        if (holds) ++satisfied;
        return;
      }
      for (int j = 0; j < k; ++j) {
        if (taken[j]) continue;
        taken[j] = true;
        assignment[var] = subset[j];
        assign(var + 1);
        taken[j] = false;
      }
    };
    assign(0);
  }
  return static_cast<double>(satisfied) / static_cast<double>(total);
}

std::vector<double> model_a_distribution(std::span<const IndicatorPotential> rules, int k,
                                         SignaturePtr signature, std::size_t max_atoms) {
  WorldEnumeration all(signature, max_atoms);
  std::vector<double> log_weights(all.size());
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    const World w = all.world(i);
    double s = 0.0;
    for (const auto& rule : rules) s += rule.weight * subset_satisfaction_fraction(rule.formula, k, w);
    log_weights[i] = s;
  }
  const double log_z = log_sum_exp(log_weights);
  std::vector<double> p(all.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_weights[i] - log_z);
  return p;
}

}  // namespace nmln
