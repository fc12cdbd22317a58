#include "nmln/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nmln/combinatorics.hpp"
#include "nmln/errors.hpp"

namespace nmln {

namespace {

constexpr std::uint64_t kNoiseTag = 0x401;
constexpr std::uint64_t kChainInitTag = 0xc4a;
constexpr std::uint64_t kFragmentTag = 0xf7a;
constexpr std::uint64_t kPairTag = 0x9a1;

double norm(std::span<const double> v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::sequential:
      return "sequential";
    case SamplerMode::blocked:
      return "blocked";
    case SamplerMode::constrained:
      return "constrained";
  }
  return "sequential";
}

SamplerMode parse_sampler_mode(std::string_view name) {
  if (name == "sequential") return SamplerMode::sequential;
  if (name == "blocked") return SamplerMode::blocked;
  if (name == "constrained") return SamplerMode::constrained;
  throw InvalidArgument("unknown sampler mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (!(pi_n >= 0.0 && pi_n <= 0.5)) throw InvalidArgument("pi_n must lie in [0, 0.5]");
  if (chains < 1) throw InvalidArgument("at least one chain is required");
  if (sweeps_per_update < 1) throw InvalidArgument("sweeps per update must be >= 1");
  if (!(neg_sample_rate >= 0.0 && neg_sample_rate <= 1.0)) {
    throw InvalidArgument("neg_sample_rate must lie in [0, 1]");
  }
  if (disconnected_per_connected && *disconnected_per_connected < 0) {
    throw InvalidArgument("disconnected fragments per connected one must be >= 0");
  }
}

GradientSet exact_grad(const PotentialModel& model, std::span<const World> data,
                       std::size_t max_atoms) {
  if (data.empty()) throw InvalidArgument("exact_grad: no data");
  const auto signature = data.front().signature_ptr();
  OracleOptions options;
  options.max_atoms = max_atoms;
  const auto dist = exact_distribution(model, signature, options);

  GradientAccumulator data_side(model, signature);
  for (const auto& w : data) {
    if (!(w.signature() == *signature)) throw SignatureMismatch("exact_grad: mixed signatures");
    data_side.add_world(w, 1.0 / static_cast<double>(data.size()));
  }
  GradientAccumulator model_side(model, signature);
  for (std::size_t i = 0; i < dist.worlds.size(); ++i) {
    model_side.add_world(World::from_index(signature, dist.worlds[i]), dist.probability(i));
  }
  GradientSet out;
  out.gradient = data_side.gradient();
  const auto expected = model_side.gradient();
  for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] -= expected[i];
  out.data_statistics.assign(data_side.statistics().begin(), data_side.statistics().end());
  out.model_statistics.assign(model_side.statistics().begin(), model_side.statistics().end());
  return out;
}

Trainer::Trainer(PotentialModel initial, std::vector<World> data, TrainConfig config)
    : model_(std::move(initial)), data_(std::move(data)), config_(std::move(config)) {
  config_.validate();
  if (data_.empty()) throw InvalidArgument("training requires at least one world");
  signature_ = data_.front().signature_ptr();
  for (const auto& w : data_) {
    if (!(w.signature() == *signature_)) {
      throw SignatureMismatch("all training worlds must share one signature");
    }
  }
  model_.validate(*signature_);
  if (config_.sampler == SamplerMode::blocked) {
    schedule_ = build_schedule(*signature_, model_.k);
  } else {
    schedule_ = sequential_schedule(*signature_);
  }
  if (config_.sampler == SamplerMode::constrained) {
    validate_exclusion_blocks(*signature_, config_.constraints);
  }
  if (!config_.exact_gradients) {
    for (int c = 0; c < config_.chains; ++c) {
      Rng rng(derive_seed({config_.seed, kChainInitTag, static_cast<std::uint64_t>(c)}));
      ChainState chain{apply_noise(data_[c % data_.size()], config_.pi_n, rng),
                       derive_seed({config_.seed, static_cast<std::uint64_t>(c)}), 0};
      chains_.push_back(std::move(chain));
    }
  }
  const std::size_t p = num_parameters(model_);
  adam_m_.assign(p, 0.0);
  adam_v_.assign(p, 0.0);
}

std::vector<std::vector<ConstantId>> Trainer::fragment_sample(const World& world, Rng& rng) const {
  const Signature& sig = world.signature();
  const int n = static_cast<int>(sig.num_constants());
  const int k = model_.k;
  auto connected = [&](std::span<const int> subset) {
    for (std::size_t p = 0; p < sig.num_predicates(); ++p) {
      if (sig.predicates()[p].arity != 2) continue;
      for (int a : subset) {
        for (int b : subset) {
          if (a != b && world.get(GroundAtom{static_cast<PredicateId>(p), 2, {a, b}})) return true;
        }
      }
    }
    return false;
  };
  std::vector<std::vector<ConstantId>> chosen;
  std::set<std::vector<ConstantId>> seen;
  for (const auto& s : k_subsets(n, k)) {
    if (connected(s)) {
      chosen.push_back(s);
      seen.insert(s);
    }
  }
  const std::uint64_t total = binomial(n, k);
  const std::uint64_t wanted = std::min<std::uint64_t>(
      static_cast<std::uint64_t>(*config_.disconnected_per_connected) * chosen.size(),
      total - chosen.size());
  std::uint64_t added = 0;
  std::vector<ConstantId> pick;
  while (added < wanted) {
    // Uniform k-subset by partial Fisher-Yates.
    std::vector<ConstantId> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_below(rng, n - i)]);
    pick.assign(pool.begin(), pool.begin() + k);
    std::sort(pick.begin(), pick.end());
    if (seen.insert(pick).second) {
      chosen.push_back(pick);
      ++added;
    }
  }
  if (chosen.empty()) chosen = k_subsets(n, k);
  return chosen;
}

void Trainer::advance_chains(const BlockSchedule& schedule, GibbsSampler& sampler) {
  for (auto& chain : chains_) {
    for (int s = 0; s < config_.sweeps_per_update; ++s) {
      switch (config_.sampler) {
        case SamplerMode::sequential:
          sampler.sweep_sequential(chain);
          break;
        case SamplerMode::blocked:
          sampler.sweep_blocked(chain, schedule);
          break;
        case SamplerMode::constrained:
          sampler.sweep_constrained(chain, config_.constraints);
          break;
      }
    }
    if (hook_) hook_(chain, epoch_);
  }
}

void Trainer::apply_update(std::vector<double>& gradient, GradientReport& report) {
  const auto layout = parameter_layout(model_);
  auto zero = [&](std::size_t b, std::size_t e) {
    std::fill(gradient.begin() + b, gradient.begin() + e, 0.0);
  };
  if (!config_.train_net) zero(layout.net_begin, layout.net_end);
  if (!config_.train_betas) zero(layout.beta_begin, layout.beta_end);
  if (!config_.train_embeddings) zero(layout.embedding_begin, layout.embedding_end);

  for (double g : gradient) {
    if (!std::isfinite(g)) throw NumericError("training: non-finite gradient at epoch " +
                                              std::to_string(epoch_));
  }
  report.grad_norm_net = norm(gradient, layout.net_begin, layout.net_end);
  report.grad_norm_beta = norm(gradient, layout.beta_begin, layout.beta_end);
  report.grad_norm_embedding = norm(gradient, layout.embedding_begin, layout.embedding_end);
  const double total = norm(gradient, 0, gradient.size());
  if (config_.clip_norm > 0.0 && total > config_.clip_norm) {
    const double scale = config_.clip_norm / total;
    for (auto& g : gradient) g *= scale;
    report.clipped = true;
  }

  auto params = flatten_parameters(model_);
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += lr * gradient[i];
  } else {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double t = static_cast<double>(epoch_ + 1);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam_m_[i] = b1 * adam_m_[i] + (1.0 - b1) * gradient[i];
      adam_v_[i] = b2 * adam_v_[i] + (1.0 - b2) * gradient[i] * gradient[i];
      params[i] += lr * (adam_m_[i] / c1) / (std::sqrt(adam_v_[i] / c2) + eps);
    }
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw NumericError("training diverged at epoch " + std::to_string(epoch_));
  }
  assign_parameters(model_, params);
}

GradientReport Trainer::grad_step() {
  GradientReport report;
  report.epoch = epoch_;
  const double data_weight = 1.0 / static_cast<double>(data_.size());

  std::vector<World> noisy;
  noisy.reserve(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    Rng rng(derive_seed({config_.seed, kNoiseTag, static_cast<std::uint64_t>(epoch_), i}));
    noisy.push_back(apply_noise(data_[i], config_.pi_n, rng));
  }

  std::vector<double> gradient;
  if (config_.exact_gradients) {
    auto set = exact_grad(model_, noisy, kDefaultOracleMaxAtoms);
    gradient = std::move(set.gradient);
    report.data_statistics = std::move(set.data_statistics);
    report.model_statistics = std::move(set.model_statistics);
  } else {
    const bool subsample = model_.embeddings && config_.disconnected_per_connected.has_value();
    std::vector<std::vector<ConstantId>> fragments;
    GradientAccumulator data_side(model_, signature_);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      if (subsample) {
        Rng rng(derive_seed({config_.seed, kFragmentTag, static_cast<std::uint64_t>(epoch_), i}));
        fragments = fragment_sample(noisy[i], rng);
        data_side.add_fragments(noisy[i], fragments, data_weight);
      } else {
        data_side.add_world(noisy[i], data_weight);
      }
    }

    GibbsSampler sampler(model_, signature_);
    if (config_.sampler == SamplerMode::blocked && config_.negative_sampling) {
      Rng rng(derive_seed({config_.seed, kPairTag, static_cast<std::uint64_t>(epoch_)}));
      const auto reduced = subsample_pairs(schedule_, noisy.front(), config_.neg_sample_rate, rng);
      advance_chains(reduced, sampler);
    } else {
      advance_chains(schedule_, sampler);
    }

    GradientAccumulator model_side(model_, signature_);
    const double chain_weight = 1.0 / static_cast<double>(chains_.size());
    for (const auto& chain : chains_) {
      if (subsample) {
        model_side.add_fragments(chain.world, fragments, chain_weight);
      } else {
        model_side.add_world(chain.world, chain_weight);
      }
    }
    gradient = data_side.gradient();
    const auto expected = model_side.gradient();
    for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] -= expected[i];
    report.data_statistics.assign(data_side.statistics().begin(), data_side.statistics().end());
    report.model_statistics.assign(model_side.statistics().begin(), model_side.statistics().end());
  }
  report.residuals.resize(report.data_statistics.size());
  for (std::size_t i = 0; i < report.residuals.size(); ++i) {
    report.residuals[i] = report.data_statistics[i] - report.model_statistics[i];
  }
  apply_update(gradient, report);
  ++epoch_;
  return report;
}

PotentialModel train(PotentialModel initial, std::vector<World> data, const TrainConfig& config,
                     const std::function<void(const GradientReport&)>& on_report) {
  Trainer trainer(std::move(initial), std::move(data), config);
  for (int e = 0; e < config.epochs; ++e) {
    const auto report = trainer.grad_step();
    if (on_report) on_report(report);
  }
  return trainer.model();
}

}  // namespace nmln
