#pragma once

// Evaluation protocols: knowledge-base completion ranking, triple
// classification and collection of generated structures.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nmln/gibbs.hpp"
#include "nmln/potential.hpp"
#include "nmln/relational.hpp"
#include "nmln/trainer.hpp"

namespace nmln {

/// r(a', b) for every a' != a, then r(a, b') for every b' != b, in constant
/// order, minus atoms true in `kb`. Throws InvalidArgument for non-binary atoms.
std::vector<GroundAtom> corruptions(const GroundAtom& test, const World& kb);

struct MarginalConfig {
  int burn_in = 1000;
  int sweeps = 1000;
  std::uint64_t seed = 0;
};

/// P(atom = true) for each query atom, estimated by Gibbs sweeps over the query
/// atoms only. Every other atom is clamped to its value in `evidence`; query
/// atoms start false.
std::vector<double> query_marginals(const PotentialModel& model, const World& evidence,
                                    std::span<const AtomIndex> query, const MarginalConfig& config);

struct RankResult {
  GroundAtom test;
  std::size_t corruption_count = 0;
  /// 1 + strictly higher + ties / 2.
  double rank = 1.0;
  double reciprocal_rank = 1.0;
};

RankResult rank_from_scores(const GroundAtom& test, double gold, std::span<const double> others);

/// Ranks the test atom against its corruptions by joint query marginals.
/// `evidence` must hold the training KB with every test fact false.
RankResult rank_fact(const GroundAtom& test, std::span<const GroundAtom> corrupted,
                     const PotentialModel& model, const World& evidence,
                     const MarginalConfig& config);

/// Ranks every test fact; fact i uses a seed derived from (config.seed, i), so
/// results do not depend on the thread count.
std::vector<RankResult> rank_all(std::span<const GroundAtom> tests, const PotentialModel& model,
                                 const World& evidence, const MarginalConfig& config,
                                 int threads = 0);

struct KbcMetrics {
  double mrr = 0.0;
  std::map<int, double> hits;
};

KbcMetrics kbc_metrics(std::span<const RankResult> results, std::span<const int> m_values);

struct ScoredTriple {
  GroundAtom atom;
  double score = 0.0;
  bool label = false;
};

/// Predict true iff score > threshold.
struct ThresholdPolicy {
  std::map<PredicateId, double> per_relation;
  double global = 0.5;

  double threshold(PredicateId relation) const;
};

/// Per relation, the accuracy-maximizing threshold on the validation triples;
/// the global threshold is fitted on all of them.
ThresholdPolicy fit_thresholds(std::span<const ScoredTriple> validation);

double classification_accuracy(std::span<const ScoredTriple> test, const ThresholdPolicy& policy);

/// Isomorphism-invariant key of a whole world: the lexicographically smallest
/// code over every renaming of its constants. Throws DomainTooLarge above
/// kMaxCanonicalConstants.
inline constexpr std::size_t kMaxCanonicalConstants = 8;
std::string canonical_key(const World& world);

/// Frequency table of canonicalized structures.
class SampleLog {
 public:
  struct Entry {
    std::string key;
    World representative;
    std::size_t count = 0;
    std::uint64_t first_sweep = 0;
  };

  /// window = 0 keeps every sample; otherwise top() may be restricted to the
  /// last `window` samples.
  explicit SampleLog(std::size_t window = 0) : window_(window) {}

  void add(const World& world, std::uint64_t sweep);

  std::size_t kept() const noexcept { return kept_; }
  const std::vector<std::uint64_t>& sweeps() const noexcept { return sweeps_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Most frequent entries, ties broken by first appearance. With
  /// last_window, counts cover only the most recent samples.
  std::vector<Entry> top(std::size_t n, bool last_window = false) const;

 private:
  std::size_t window_;
  std::size_t kept_ = 0;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::deque<std::size_t> recent_;
  std::vector<std::uint64_t> sweeps_;
};

/// Trainer hook that logs every chain snapshot from `first_epoch` on.
Trainer::SnapshotHook collect_generations(SampleLog& log, int first_epoch = 0);

/// Runs one sequential chain from the all-false world and logs each of
/// `sweeps` snapshots after `burn_in`.
void sample_generations(const PotentialModel& model, SignaturePtr signature, int burn_in,
                        int sweeps, std::uint64_t seed, SampleLog& log,
                        std::span<const ExclusionBlock> constraints = {});

/// Sum over atoms of log P(atom = its value | every other atom).
double pseudo_log_likelihood(const PotentialModel& model, const World& world);

/// Adds skip(x, z) for distinct x, y, z with bond(x, y) and bond(y, z) for any
/// of the bond predicates, read symmetrically.
World skip_bond_augment(const World& world, std::span<const PredicateId> bonds,
                        PredicateId skip);

}  // namespace nmln
