#pragma once

// Fragment potentials (neural symmetric, neural general with constant
// embeddings, logical indicators), their global aggregation and the
// exponential-family score  sum_i beta_i * Phi_i(world).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmln/dense_net.hpp"
#include "nmln/formula.hpp"
#include "nmln/relational.hpp"

namespace nmln {

struct EmbeddingTable {
  int dim = 0;
  /// num_constants x dim, row-major.
  std::vector<double> values;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(ConstantId c) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(c) * dim, dim);
  }
};

/// Weighted constant-free formula; its fragment potential is the weight times
/// the fraction of anonymizations that satisfy the formula.
struct IndicatorPotential {
  Formula formula;
  double weight = 1.0;
};

struct PotentialModel {
  int k = 2;
  /// Shared network whose output heads are the neural potentials. Absent for
  /// purely logical models.
  std::optional<DenseNet> net;
  /// One weight per neural head, followed by one per indicator.
  std::vector<double> betas;
  std::optional<EmbeddingTable> embeddings;
  std::vector<IndicatorPotential> indicators;

  int heads() const { return net ? net->output_width() : 0; }
  std::size_t num_potentials() const { return heads() + indicators.size(); }
  bool symmetric() const { return !embeddings.has_value(); }

  /// Width the network input must have for this signature.
  int input_width(const Signature& signature) const;

  /// Checks every structural invariant against the signature; throws on violation.
  void validate(const Signature& signature) const;
};

struct ModelSpec {
  int k = 2;
  std::vector<int> hidden = {75, 50};
  Activation hidden_activation = Activation::relu;
  int heads = 1;
  /// 0 builds a symmetric model.
  int embedding_dim = 0;
};

/// Random initialization: weights uniform in [-s, s] with s = fan_in^(-1/2),
/// biases zero, betas one, embeddings uniform in [-1/2, 1/2].
PotentialModel make_model(const Signature& signature, const ModelSpec& spec, std::uint64_t seed);

// Flat parameter view: [net parameters | betas | embeddings].
std::size_t num_parameters(const PotentialModel& model);
std::vector<double> flatten_parameters(const PotentialModel& model);
void assign_parameters(PotentialModel& model, std::span<const double> flat);

struct ParameterLayout {
  std::size_t net_begin = 0, net_end = 0;
  std::size_t beta_begin = 0, beta_end = 0;
  std::size_t embedding_begin = 0, embedding_end = 0;
};
ParameterLayout parameter_layout(const PotentialModel& model);

// Reference evaluation on materialized fragments.
std::vector<double> symmetric_potential(const Fragment& fragment, const PotentialModel& model);
std::vector<double> general_potential(const Fragment& fragment, const PotentialModel& model);
double indicator_potential(const Fragment& fragment, const IndicatorPotential& indicator);
/// Neural heads (symmetric or general, by model mode) followed by indicators.
std::vector<double> fragment_potentials(const Fragment& fragment, const PotentialModel& model);

std::vector<double> global_potential(const World& world, const PotentialModel& model);
double world_score(const World& world, const PotentialModel& model);
/// world_score(world with atom flipped) - world_score(world).
double score_delta(const World& world, AtomIndex atom, const PotentialModel& model);

struct ScorerOptions {
  /// Memoize per-code potentials for symmetric models whose code length does
  /// not exceed this many bits.
  int memo_max_bits = 18;
};

/// Hot-path evaluator bound to one model and signature. Holds scratch buffers
/// and a per-code memo, so one instance must not be shared between threads;
/// copies are independent.
class Scorer {
 public:
  Scorer(const PotentialModel& model, SignaturePtr signature, ScorerOptions options = {});

  const PotentialModel& model() const noexcept { return *model_; }
  const Signature& signature() const noexcept { return *signature_; }
  int k() const noexcept { return model_->k; }
  /// 1 / C(n, k): weight of one fragment in a global potential.
  double fragment_weight() const noexcept { return fragment_weight_; }
  std::size_t fragments_evaluated() const noexcept { return fragments_evaluated_; }
  void reset_counters() noexcept { fragments_evaluated_ = 0; }

  /// Potentials of the fragment over `subset` (ascending constant ids).
  void fragment_potentials(const World& world, std::span<const ConstantId> subset,
                           std::span<double> out);
  /// beta . fragment_potentials.
  double fragment_score(const World& world, std::span<const ConstantId> subset);

  std::vector<double> global_potentials(const World& world);
  double world_score(const World& world);

  /// Sum of fragment scores over every k-subset that contains all of `fixed`
  /// (unnormalized). Zero when |fixed| > k.
  double local_score(const World& world, std::span<const ConstantId> fixed);

  /// Score difference of flipping one atom; `world` is restored before return.
  double score_delta(World& world, AtomIndex atom);
  /// score(atom = true) - score(atom = false); `world` is restored.
  double conditional_logit(World& world, AtomIndex atom);

  /// Calls fn(order) for each anonymization of the subset, where order[j] is
  /// the constant renamed to j, in the canonical permutation order.
  template <typename Fn>
  void for_each_anonymization(std::span<const ConstantId> subset, Fn&& fn) {
    const int k = static_cast<int>(subset.size());
    for (const auto& inv : inverse_perms_) {
      for (int j = 0; j < k; ++j) order_[j] = subset[inv[j]];
      fn(std::span<const ConstantId>(order_.data(), k));
    }
  }

  /// Raw per-anonymization potentials (heads, then indicators already divided
  /// by k!) of the code of `order`.
  void anonymization_potentials(const World& world, std::span<const ConstantId> order,
                                std::span<double> out);

 private:
  void compute_raw(std::span<const std::uint8_t> code, std::span<const ConstantId> order,
                   std::span<double> out);
  const double* memo_entry(std::uint64_t code);

  const PotentialModel* model_;
  SignaturePtr signature_;
  std::size_t code_length_;
  std::size_t num_potentials_;
  double fragment_weight_;
  double inv_factorial_;
  std::vector<std::vector<int>> inverse_perms_;

  bool use_memo_ = false;
  // Per code: num_potentials raw values followed by their beta-weighted sum.
  std::vector<double> memo_;
  std::vector<std::uint8_t> memo_filled_;

  std::vector<ConstantId> order_;
  std::vector<ConstantId> subset_scratch_;
  std::vector<std::uint8_t> code_;
  std::vector<double> input_;
  std::vector<double> raw_;
  Tape tape_;
  std::size_t fragments_evaluated_ = 0;
};

/// Accumulates sum_w w * Phi(world) and the matching parameter gradient of
/// sum_w w * score(world). Gradient work is deferred and grouped by distinct
/// network input, so repeated anonymizations cost one backward pass.
class GradientAccumulator {
 public:
  GradientAccumulator(const PotentialModel& model, SignaturePtr signature);

  /// Adds `weight` * world over all C(n, k) fragments.
  void add_world(const World& world, double weight);
  /// Adds `weight` * the mean over the given fragments only.
  void add_fragments(const World& world, std::span<const std::vector<ConstantId>> subsets,
                     double weight);

  /// Weighted sum of global potential vectors added so far.
  std::span<const double> statistics() const noexcept { return statistics_; }
  double total_weight() const noexcept { return total_weight_; }

  /// Gradient of sum_w w * score(world) in flatten_parameters() layout.
  std::vector<double> gradient() const;

 private:
  void add_subset(const World& world, std::span<const ConstantId> subset, double weight);

  const PotentialModel* model_;
  SignaturePtr signature_;
  Scorer scorer_;
  std::vector<double> statistics_;
  std::vector<double> scratch_;
  std::vector<std::uint8_t> code_;
  double total_weight_ = 0.0;
  // Network input key -> accumulated occurrence weight.
  std::unordered_map<std::string, double> occurrences_;
};

}  // namespace nmln
