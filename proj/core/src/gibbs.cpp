#include "nmln/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "nmln/errors.hpp"

namespace nmln {

namespace {

constexpr std::uint64_t kSequentialTag = 0x5e9;
constexpr std::uint64_t kBlockedTag = 0xb10c;
constexpr std::uint64_t kConstrainedTag = 0xc0;
constexpr std::uint64_t kLeftoverTag = 0xc1;
constexpr std::uint64_t kQueryTag = 0xa7;

bool is_unary_or_reflexive(const GroundAtom& a) { return a.arity == 1 || a.args[0] == a.args[1]; }

}  // namespace

std::size_t BlockSchedule::pair_group_count() const {
  return static_cast<std::size_t>(std::count_if(groups.begin(), groups.end(),
                                                [](const auto& g) { return g.kind == GroupKind::pairs; }));
}

std::vector<std::vector<std::pair<ConstantId, ConstantId>>> round_robin_matchings(int n) {
  std::vector<std::vector<std::pair<ConstantId, ConstantId>>> rounds;
  if (n < 2) return rounds;
  // Odd n: add a dummy vertex; pairs with it are dropped.
  const int m = n % 2 == 0 ? n : n + 1;
  const int fixed = m - 1;
  for (int r = 0; r < m - 1; ++r) {
    std::vector<std::pair<ConstantId, ConstantId>> round;
    auto add = [&](int a, int b) {
      if (a >= n || b >= n) return;
      round.emplace_back(std::min(a, b), std::max(a, b));
    };
    add(r, fixed);
    for (int i = 1; i < m / 2; ++i) {
      add((r + i) % (m - 1), (r - i + (m - 1)) % (m - 1));
    }
    std::sort(round.begin(), round.end());
    rounds.push_back(std::move(round));
  }
  return rounds;
}

namespace {

std::vector<AtomIndex> pair_block(const Signature& sig, ConstantId a, ConstantId b) {
  std::vector<AtomIndex> atoms;
  for (std::size_t p = 0; p < sig.num_predicates(); ++p) {
    if (sig.predicates()[p].arity != 2) continue;
    GroundAtom ab{static_cast<PredicateId>(p), 2, {a, b}};
    GroundAtom ba{static_cast<PredicateId>(p), 2, {b, a}};
    atoms.push_back(sig.atom_index(ab));
    atoms.push_back(sig.atom_index(ba));
  }
  return atoms;
}

UpdateGroup unary_reflexive_group(const Signature& sig) {
  UpdateGroup g;
  g.kind = GroupKind::sequential;
  g.blocks.emplace_back();
  for (AtomIndex i = 0; i < sig.num_atoms(); ++i) {
    if (is_unary_or_reflexive(sig.atom(i))) g.blocks.back().push_back(i);
  }
  return g;
}

}  // namespace

BlockSchedule sequential_schedule(const Signature& signature) {
  BlockSchedule s;
  s.k = 0;
  s.num_constants = signature.num_constants();
  UpdateGroup g;
  g.kind = GroupKind::sequential;
  g.blocks.emplace_back(signature.num_atoms());
  for (AtomIndex i = 0; i < signature.num_atoms(); ++i) g.blocks.back()[i] = i;
  s.groups.push_back(std::move(g));
  return s;
}

BlockSchedule build_schedule(const Signature& signature, int k) {
  if (k < 1 || k > 3) throw InvalidArgument("build_schedule: k must be 1, 2 or 3");
  const int n = static_cast<int>(signature.num_constants());
  BlockSchedule s;
  s.k = k;
  s.num_constants = signature.num_constants();
  bool has_binary = false;
  for (const auto& p : signature.predicates()) has_binary |= p.arity == 2;

  if (k == 1) {
    UpdateGroup per_constant;
    per_constant.kind = GroupKind::per_constant;
    per_constant.blocks.resize(n);
    UpdateGroup independent;
    independent.kind = GroupKind::independent;
    for (AtomIndex i = 0; i < signature.num_atoms(); ++i) {
      const auto a = signature.atom(i);
      if (is_unary_or_reflexive(a)) {
        per_constant.blocks[a.args[0]].push_back(i);
      } else {
        independent.blocks.push_back({i});
      }
    }
    s.groups.push_back(std::move(per_constant));
    if (!independent.blocks.empty()) s.groups.push_back(std::move(independent));
    return s;
  }

  s.groups.push_back(unary_reflexive_group(signature));
  if (!has_binary) return s;

  if (k == 2) {
    UpdateGroup g;
    g.kind = GroupKind::pairs;
    for (ConstantId a = 0; a < n; ++a) {
      for (ConstantId b = a + 1; b < n; ++b) {
        g.blocks.push_back(pair_block(signature, a, b));
        g.pairs.emplace_back(a, b);
      }
    }
    if (!g.blocks.empty()) s.groups.push_back(std::move(g));
    return s;
  }

  for (const auto& round : round_robin_matchings(n)) {
    UpdateGroup g;
    g.kind = GroupKind::pairs;
    for (const auto& [a, b] : round) {
      g.blocks.push_back(pair_block(signature, a, b));
      g.pairs.emplace_back(a, b);
    }
    s.groups.push_back(std::move(g));
  }
  return s;
}

BlockSchedule subsample_pairs(const BlockSchedule& schedule, const World& world, double rate,
                              Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("subsample_pairs: rate outside [0, 1]");
  BlockSchedule out;
  out.k = schedule.k;
  out.num_constants = schedule.num_constants;
  for (const auto& g : schedule.groups) {
    if (g.kind != GroupKind::pairs) {
      out.groups.push_back(g);
      continue;
    }
    UpdateGroup kept;
    kept.kind = g.kind;
    for (std::size_t b = 0; b < g.blocks.size(); ++b) {
      const auto& block = g.blocks[b];
      const bool any_true =
          std::any_of(block.begin(), block.end(), [&](AtomIndex i) { return world.get(i); });
      if (any_true || uniform01(rng) < rate) {
        kept.blocks.push_back(block);
        kept.pairs.push_back(g.pairs[b]);
      }
    }
    if (!kept.blocks.empty()) out.groups.push_back(std::move(kept));
  }
  return out;
}

std::string_view to_string(ExclusionRule rule) {
  return rule == ExclusionRule::exactly_one ? "exactly-one" : "at-most-one";
}

std::vector<ExclusionBlock> make_exclusion_blocks(const Signature& signature,
                                                  std::span<const PredicateId> unary,
                                                  std::span<const PredicateId> binary) {
  const int n = static_cast<int>(signature.num_constants());
  std::vector<ExclusionBlock> blocks;
  for (PredicateId p : unary) {
    if (signature.predicate(p).arity != 1) {
      throw InvalidArgument("exactly-one predicate '" + signature.predicate(p).name + "' is not unary");
    }
  }
  for (PredicateId p : binary) {
    if (signature.predicate(p).arity != 2) {
      throw InvalidArgument("at-most-one predicate '" + signature.predicate(p).name + "' is not binary");
    }
  }
  if (!unary.empty()) {
    for (ConstantId c = 0; c < n; ++c) {
      ExclusionBlock b;
      b.rule = ExclusionRule::exactly_one;
      for (PredicateId p : unary) b.atoms.push_back(signature.atom_index({p, 1, {c, 0}}));
      blocks.push_back(std::move(b));
    }
  }
  if (!binary.empty()) {
    for (ConstantId a = 0; a < n; ++a) {
      for (ConstantId c = 0; c < n; ++c) {
        ExclusionBlock b;
        b.rule = ExclusionRule::at_most_one;
        for (PredicateId p : binary) b.atoms.push_back(signature.atom_index({p, 2, {a, c}}));
        blocks.push_back(std::move(b));
      }
    }
  }
  return blocks;
}

void validate_exclusion_blocks(const Signature& signature, std::span<const ExclusionBlock> blocks) {
  std::vector<std::uint8_t> used(signature.num_atoms(), 0);
  for (const auto& block : blocks) {
    if (block.atoms.empty()) throw InvalidArgument("exclusion block has no legal state");
    const auto first = signature.atom(block.atoms.front());
    for (AtomIndex i : block.atoms) {
      if (i >= signature.num_atoms()) throw SignatureMismatch("exclusion block atom out of range");
      const auto a = signature.atom(i);
      if (a.arity != first.arity ||
          !std::equal(a.args.begin(), a.args.begin() + a.arity, first.args.begin())) {
        throw InvalidArgument("exclusion block atoms must share one constant tuple");
      }
      if (used[i]) throw InvalidArgument("atom " + signature.format(i) + " is in two exclusion blocks");
      used[i] = 1;
    }
  }
}

bool satisfies(const World& world, std::span<const ExclusionBlock> blocks) {
  for (const auto& block : blocks) {
    const auto count = std::count_if(block.atoms.begin(), block.atoms.end(),
                                     [&](AtomIndex i) { return world.get(i); });
    if (count > 1) return false;
    if (block.rule == ExclusionRule::exactly_one && count != 1) return false;
  }
  return true;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double conditional_prob(const ChainState& chain, AtomIndex atom, const PotentialModel& model) {
  World scratch = chain.world;
  Scorer scorer(model, scratch.signature_ptr());
  return sigmoid(scorer.conditional_logit(scratch, atom));
}

World apply_noise(const World& world, double pi_n, Rng& rng) {
  if (!(pi_n >= 0.0 && pi_n <= 1.0)) throw InvalidArgument("apply_noise: pi_n outside [0, 1]");
  World out = world;
  for (AtomIndex i = 0; i < out.size(); ++i) {
    if (uniform01(rng) < pi_n) out.flip(i);
  }
  return out;
}

int default_thread_count() {
  if (const char* env = std::getenv("NMLN_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

GibbsSampler::GibbsSampler(const PotentialModel& model, SignaturePtr signature, int threads)
    : model_(&model), signature_(std::move(signature)) {
  if (threads <= 0) threads = default_thread_count();
  scorers_.emplace_back(model, signature_);
  for (int t = 1; t < threads; ++t) scorers_.push_back(scorers_.front());
}

void GibbsSampler::sample_block(World& world, std::span<const AtomIndex> atoms, Rng& rng,
                                Scorer& scorer) {
  for (AtomIndex i : atoms) {
    const double p = sigmoid(scorer.conditional_logit(world, i));
    world.set(i, uniform01(rng) < p);
  }
}

void GibbsSampler::sweep_sequential(ChainState& chain) {
  Rng rng(derive_seed({chain.seed, chain.sweep, kSequentialTag}));
  auto& scorer = scorers_.front();
  for (AtomIndex i = 0; i < chain.world.size(); ++i) {
    const double p = sigmoid(scorer.conditional_logit(chain.world, i));
    chain.world.set(i, uniform01(rng) < p);
  }
  ++chain.sweep;
}

void GibbsSampler::sweep_atoms(ChainState& chain, std::span<const AtomIndex> atoms) {
  Rng rng(derive_seed({chain.seed, chain.sweep, kQueryTag}));
  sample_block(chain.world, atoms, rng, scorers_.front());
  ++chain.sweep;
}

void GibbsSampler::sweep_blocked(ChainState& chain, const BlockSchedule& schedule) {
  if (schedule.num_constants != signature_->num_constants()) {
    throw InvalidArgument("sweep_blocked: schedule built for a different domain");
  }
  if (schedule.k != 0 && schedule.k != model_->k) {
    throw InvalidArgument("sweep_blocked: schedule built for k=" + std::to_string(schedule.k) +
                          " but the model has k=" + std::to_string(model_->k));
  }
  const std::size_t threads = scorers_.size();
  for (std::size_t g = 0; g < schedule.groups.size(); ++g) {
    const auto& group = schedule.groups[g];
    auto run = [&](std::size_t worker) {
      for (std::size_t b = worker; b < group.blocks.size(); b += threads) {
        Rng rng(derive_seed({chain.seed, chain.sweep, kBlockedTag, g, b}));
        sample_block(chain.world, group.blocks[b], rng, scorers_[worker]);
      }
    };
    if (threads > 1 && group.blocks.size() > 1 && group.kind != GroupKind::sequential) {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(run, t);
      run(0);
    } else {
      for (std::size_t b = 0; b < group.blocks.size(); ++b) {
        Rng rng(derive_seed({chain.seed, chain.sweep, kBlockedTag, g, b}));
        sample_block(chain.world, group.blocks[b], rng, scorers_.front());
      }
    }
  }
  ++chain.sweep;
}

void GibbsSampler::sample_exclusion(World& world, const ExclusionBlock& block, Rng& rng,
                                    Scorer& scorer) {
  const auto fixed = signature_->atom(block.atoms.front()).distinct_constants();
  const std::size_t m = block.atoms.size();
  // State s < m sets atom s alone; state m (at-most-one only) is all false.
  const std::size_t states = block.rule == ExclusionRule::exactly_one ? m : m + 1;
  std::vector<double> logits(states);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t j = 0; j < m; ++j) world.set(block.atoms[j], j == s);
    logits[s] = scorer.local_score(world, fixed) * scorer.fragment_weight();
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  double u = uniform01(rng) * total;
  std::size_t pick = states - 1;
  for (std::size_t s = 0; s < states; ++s) {
    if (u < logits[s]) {
      pick = s;
      break;
    }
    u -= logits[s];
  }
  for (std::size_t j = 0; j < m; ++j) world.set(block.atoms[j], j == pick);
}

void GibbsSampler::sweep_constrained(ChainState& chain, std::span<const ExclusionBlock> blocks) {
  validate_exclusion_blocks(*signature_, blocks);
  std::vector<std::uint8_t> covered(signature_->num_atoms(), 0);
  for (const auto& block : blocks) {
    for (AtomIndex i : block.atoms) covered[i] = 1;
  }
  auto& scorer = scorers_.front();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Rng rng(derive_seed({chain.seed, chain.sweep, kConstrainedTag, b}));
    sample_exclusion(chain.world, blocks[b], rng, scorer);
  }
  Rng rng(derive_seed({chain.seed, chain.sweep, kLeftoverTag}));
  for (AtomIndex i = 0; i < chain.world.size(); ++i) {
    if (covered[i]) continue;
    const double p = sigmoid(scorer.conditional_logit(chain.world, i));
    chain.world.set(i, uniform01(rng) < p);
  }
  ++chain.sweep;
}

}  // namespace nmln
