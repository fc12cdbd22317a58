#pragma once

// Gibbs sampling over possible worlds: single-site sequential sweeps, blocked
// sweeps for k <= 3 and constrained (mutually exclusive) block sweeps.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "nmln/potential.hpp"
#include "nmln/relational.hpp"
#include "nmln/rng.hpp"

namespace nmln {

/// One persistent chain. All randomness of a sweep is derived from
/// (seed, sweep, group, block), so the chain state is the whole rng state.
struct ChainState {
  World world;
  std::uint64_t seed = 0;
  std::uint64_t sweep = 0;
};

enum class GroupKind {
  sequential,    // one block, atoms updated in order
  per_constant,  // k = 1: one block per constant (unary + reflexive atoms)
  pairs,         // one block per unordered constant pair (both directions, all binary predicates)
  independent,   // atoms that appear in no fragment; each one its own block
};

struct UpdateGroup {
  GroupKind kind = GroupKind::sequential;
  /// Blocks may be updated concurrently; atoms inside a block in order.
  std::vector<std::vector<AtomIndex>> blocks;
  /// For pair groups, the constant pair of each block.
  std::vector<std::pair<ConstantId, ConstantId>> pairs;
};

struct BlockSchedule {
  int k = 0;
  std::size_t num_constants = 0;
  std::vector<UpdateGroup> groups;

  std::size_t pair_group_count() const;
};

/// Perfect matchings of K_n by the circle method: n-1 rounds for even n, n for
/// odd n. Each round lists disjoint pairs (a < b).
std::vector<std::vector<std::pair<ConstantId, ConstantId>>> round_robin_matchings(int n);

/// Blocked schedule for k in {1, 2, 3}.
BlockSchedule build_schedule(const Signature& signature, int k);
/// Every atom in canonical order, one block.
BlockSchedule sequential_schedule(const Signature& signature);

/// Keeps every pair block containing a true atom of `world` and a `rate`
/// fraction of the empty ones. Non-pair groups are kept unchanged.
BlockSchedule subsample_pairs(const BlockSchedule& schedule, const World& world, double rate,
                              Rng& rng);

enum class ExclusionRule { exactly_one, at_most_one };

std::string_view to_string(ExclusionRule rule);

/// Atoms over one constant tuple that are sampled jointly over their legal
/// states only.
struct ExclusionBlock {
  std::vector<AtomIndex> atoms;
  ExclusionRule rule = ExclusionRule::exactly_one;
};

/// One exactly-one block per constant over `unary` predicates and one
/// at-most-one block per ordered constant pair over `binary` predicates.
std::vector<ExclusionBlock> make_exclusion_blocks(const Signature& signature,
                                                  std::span<const PredicateId> unary,
                                                  std::span<const PredicateId> binary);

/// Throws unless every block is nonempty, lies over one constant tuple and no
/// atom appears in two blocks.
void validate_exclusion_blocks(const Signature& signature, std::span<const ExclusionBlock> blocks);

/// Whether the world satisfies every block's cardinality rule.
bool satisfies(const World& world, std::span<const ExclusionBlock> blocks);

double sigmoid(double x);

/// P(atom = true | all other atoms).
double conditional_prob(const ChainState& chain, AtomIndex atom, const PotentialModel& model);

/// Independent flip of every atom with probability pi_n.
World apply_noise(const World& world, double pi_n, Rng& rng);

/// Thread count from the NMLN_THREADS environment variable (default 1).
int default_thread_count();

class GibbsSampler {
 public:
  GibbsSampler(const PotentialModel& model, SignaturePtr signature, int threads = 0);

  Scorer& scorer() { return scorers_.front(); }

  void sweep_sequential(ChainState& chain);
  void sweep_blocked(ChainState& chain, const BlockSchedule& schedule);
  void sweep_constrained(ChainState& chain, std::span<const ExclusionBlock> blocks);
  /// Resamples only `atoms` in order, every other atom held fixed (evidence).
  void sweep_atoms(ChainState& chain, std::span<const AtomIndex> atoms);

 private:
  void sample_block(World& world, std::span<const AtomIndex> atoms, Rng& rng, Scorer& scorer);
  void sample_exclusion(World& world, const ExclusionBlock& block, Rng& rng, Scorer& scorer);

  const PotentialModel* model_;
  SignaturePtr signature_;
  std::vector<Scorer> scorers_;
};

}  // namespace nmln
