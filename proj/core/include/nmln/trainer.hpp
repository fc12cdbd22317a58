#pragma once

// Maximum-likelihood training by stochastic gradient ascent. Model-side
// expectations come from persistent Gibbs chains, or from exact enumeration on
// tiny domains.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nmln/gibbs.hpp"
#include "nmln/oracle.hpp"
#include "nmln/potential.hpp"

namespace nmln {

enum class OptimizerKind { sgd, adam };
enum class SamplerMode { sequential, blocked, constrained };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  double pi_n = 0.0;
  int chains = 10;
  int sweeps_per_update = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  /// Global-norm clip; non-positive disables clipping.
  double clip_norm = 10.0;
  SamplerMode sampler = SamplerMode::sequential;
  /// Exclusion blocks for the constrained sampler.
  std::vector<ExclusionBlock> constraints;
  /// Expectations by full enumeration instead of chains (tiny domains only).
  bool exact_gradients = false;
  /// Embedding models: disconnected fragments sampled per connected one. Unset
  /// means every fragment is used.
  std::optional<int> disconnected_per_connected = 2;
  /// Blocked k = 2 sweeps visit only pairs with a true relation plus this
  /// fraction of empty pairs. Off unless enabled.
  bool negative_sampling = false;
  double neg_sample_rate = 0.1;
  bool train_net = true;
  bool train_betas = true;
  bool train_embeddings = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GradientReport {
  int epoch = 0;
  double grad_norm_net = 0.0;
  double grad_norm_beta = 0.0;
  double grad_norm_embedding = 0.0;
  /// Phi_i on the (noisy) training worlds.
  std::vector<double> data_statistics;
  /// E_P[Phi_i] estimated from the chains (or exact).
  std::vector<double> model_statistics;
  /// data_statistics - model_statistics, the beta gradient.
  std::vector<double> residuals;
  bool clipped = false;
};

/// Gradient of the mean log-likelihood, split into its two sides.
struct GradientSet {
  std::vector<double> gradient;
  std::vector<double> data_statistics;
  std::vector<double> model_statistics;
};

/// Exact gradient of mean_w [score(w) - log Z] by full enumeration.
GradientSet exact_grad(const PotentialModel& model, std::span<const World> data,
                       std::size_t max_atoms = 16);

class Trainer {
 public:
  using SnapshotHook = std::function<void(const ChainState&, int epoch)>;

  Trainer(PotentialModel initial, std::vector<World> data, TrainConfig config);

  /// One epoch: fresh noise on the data, one gradient step.
  GradientReport grad_step();

  const PotentialModel& model() const noexcept { return model_; }
  const std::vector<ChainState>& chains() const noexcept { return chains_; }
  int epoch() const noexcept { return epoch_; }
  const TrainConfig& config() const noexcept { return config_; }

  /// Called with every chain after it is advanced.
  void set_snapshot_hook(SnapshotHook hook) { hook_ = std::move(hook); }

 private:
  std::vector<std::vector<ConstantId>> fragment_sample(const World& world, Rng& rng) const;
  void advance_chains(const BlockSchedule& schedule, GibbsSampler& sampler);
  void apply_update(std::vector<double>& gradient, GradientReport& report);

  PotentialModel model_;
  std::vector<World> data_;
  TrainConfig config_;
  SignaturePtr signature_;
  std::vector<ChainState> chains_;
  BlockSchedule schedule_;
  int epoch_ = 0;
  std::vector<double> adam_m_, adam_v_;
  SnapshotHook hook_;
};

/// Runs config.epochs gradient steps and returns the trained model.
PotentialModel train(PotentialModel initial, std::vector<World> data, const TrainConfig& config,
                     const std::function<void(const GradientReport&)>& on_report = {});

}  // namespace nmln
