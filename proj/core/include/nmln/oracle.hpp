#pragma once

// Brute-force ground truth on tiny domains: every world is enumerated, so the
// partition function, marginals and expectations are exact.

#include <cstdint>
#include <span>
#include <vector>

#include "nmln/gibbs.hpp"
#include "nmln/potential.hpp"
#include "nmln/relational.hpp"

namespace nmln {

inline constexpr std::size_t kDefaultOracleMaxAtoms = 20;

struct OracleOptions {
  std::size_t max_atoms = kDefaultOracleMaxAtoms;
  /// When non-empty, only worlds satisfying every block are enumerated.
  std::span<const ExclusionBlock> constraints;
};

/// All truth assignments of a signature; world i has atom j true iff bit j of i
/// is set.
class WorldEnumeration {
 public:
  WorldEnumeration(SignaturePtr signature, std::size_t max_atoms = kDefaultOracleMaxAtoms);

  std::uint64_t size() const noexcept { return std::uint64_t{1} << signature_->num_atoms(); }
  World world(std::uint64_t index) const { return World::from_index(signature_, index); }
  const SignaturePtr& signature() const noexcept { return signature_; }

 private:
  SignaturePtr signature_;
};

/// Scores of every (legal) world plus the log partition function.
struct ExactDistribution {
  SignaturePtr signature;
  std::vector<std::uint64_t> worlds;
  std::vector<double> scores;
  double log_z = 0.0;

  double probability(std::size_t i) const;
  std::vector<double> probabilities() const;
};

ExactDistribution exact_distribution(const PotentialModel& model, SignaturePtr signature,
                                     const OracleOptions& options = {});

/// log Z by a single max-shifted log-sum-exp.
double partition(const PotentialModel& model, SignaturePtr signature,
                 const OracleOptions& options = {});

std::vector<double> exact_marginals(const PotentialModel& model, SignaturePtr signature,
                                    const OracleOptions& options = {});

/// E_P[Phi_i] for every potential of the model.
std::vector<double> exact_expected_potentials(const PotentialModel& model, SignaturePtr signature,
                                              const OracleOptions& options = {});

/// Mean over `data` of score(world) - log Z.
double exact_log_likelihood(const PotentialModel& model, std::span<const World> data,
                            const OracleOptions& options = {});

/// Fraction of (k-subset, bijective variable assignment) pairs under which the
/// formula holds in the world. Evaluated directly on world atoms.
double subset_satisfaction_fraction(const Formula& formula, int k, const World& world);

/// Per-world probabilities of the classical model
///   p(w) proportional to exp(sum_rules weight * fraction(rule, w)),
/// indexed like WorldEnumeration.
std::vector<double> model_a_distribution(std::span<const IndicatorPotential> rules, int k,
                                         SignaturePtr signature,
                                         std::size_t max_atoms = kDefaultOracleMaxAtoms);

}  // namespace nmln
