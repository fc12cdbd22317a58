#include "nmln/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "nmln/combinatorics.hpp"
#include "nmln/errors.hpp"
#include "nmln/rng.hpp"

namespace nmln {

int PotentialModel::input_width(const Signature& signature) const {
  const int emb = embeddings ? embeddings->dim * k : 0;
  return static_cast<int>(signature.code_length(k)) + emb;
}

void PotentialModel::validate(const Signature& signature) const {
  if (k < 1) throw InvalidArgument("model: k must be positive");
  if (betas.size() != num_potentials()) {
    throw InvalidArgument("model: expected " + std::to_string(num_potentials()) + " betas, got " +
                          std::to_string(betas.size()));
  }
  if (net && net->input_width() != input_width(signature)) {
    throw InvalidArgument("model: network input width " + std::to_string(net->input_width()) +
                          " does not match code width " + std::to_string(input_width(signature)));
  }
  if (embeddings) {
    if (embeddings->dim < 1) throw InvalidArgument("model: embedding dimension must be >= 1");
    if (embeddings->rows() != signature.num_constants() ||
        embeddings->values.size() != signature.num_constants() * embeddings->dim) {
      throw SignatureMismatch("model: embedding table needs one row per constant");
    }
    if (!net) throw InvalidArgument("model: embeddings require a network");
  }
  for (const auto& ind : indicators) {
    if (ind.formula.num_variables() > k) {
      throw InvalidArgument("model: formula '" + ind.formula.text() + "' uses more than k variables");
    }
  }
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(betas) || (net && !finite(net->parameters())) ||
      (embeddings && !finite(embeddings->values))) {
    throw NumericError("model: non-finite parameter");
  }
}

PotentialModel make_model(const Signature& signature, const ModelSpec& spec, std::uint64_t seed) {
  if (spec.k < 1) throw InvalidArgument("make_model: k must be positive");
  if (spec.heads < 0) throw InvalidArgument("make_model: negative head count");
  Rng rng(seed);
  PotentialModel model;
  model.k = spec.k;
  if (spec.embedding_dim > 0) {
    EmbeddingTable table;
    table.dim = spec.embedding_dim;
    table.values.resize(signature.num_constants() * spec.embedding_dim);
    for (auto& v : table.values) v = uniform01(rng) - 0.5;
    model.embeddings = std::move(table);
  }
  if (spec.heads > 0) {
    std::vector<int> widths{model.input_width(signature)};
    std::vector<Activation> acts;
    for (int h : spec.hidden) {
      widths.push_back(h);
      acts.push_back(spec.hidden_activation);
    }
    widths.push_back(spec.heads);
    acts.push_back(Activation::identity);
    DenseNet net(widths, acts);
    auto params = net.mutable_parameters();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
      const std::size_t begin = net.weight_offset(l);
      for (std::size_t i = begin; i < net.bias_offset(l); ++i) {
        params[i] = (2.0 * uniform01(rng) - 1.0) * scale;
      }
    }
    model.net = std::move(net);
  }
  model.betas.assign(model.num_potentials(), 1.0);
  return model;
}

ParameterLayout parameter_layout(const PotentialModel& model) {
  ParameterLayout l;
  l.net_end = model.net ? model.net->num_parameters() : 0;
  l.beta_begin = l.net_end;
  l.beta_end = l.beta_begin + model.betas.size();
  l.embedding_begin = l.beta_end;
  l.embedding_end = l.embedding_begin + (model.embeddings ? model.embeddings->values.size() : 0);
  return l;
}

std::size_t num_parameters(const PotentialModel& model) {
  return parameter_layout(model).embedding_end;
}

std::vector<double> flatten_parameters(const PotentialModel& model) {
  std::vector<double> out;
  out.reserve(num_parameters(model));
  if (model.net) {
    const auto p = model.net->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.insert(out.end(), model.betas.begin(), model.betas.end());
  if (model.embeddings) {
    out.insert(out.end(), model.embeddings->values.begin(), model.embeddings->values.end());
  }
  return out;
}

void assign_parameters(PotentialModel& model, std::span<const double> flat) {
  const auto layout = parameter_layout(model);
  if (flat.size() != layout.embedding_end) {
    throw InvalidArgument("assign_parameters: size mismatch");
  }
  if (model.net) {
    auto p = model.net->mutable_parameters();
    std::copy(flat.begin(), flat.begin() + layout.net_end, p.begin());
  }
  std::copy(flat.begin() + layout.beta_begin, flat.begin() + layout.beta_end, model.betas.begin());
  if (model.embeddings) {
    std::copy(flat.begin() + layout.embedding_begin, flat.begin() + layout.embedding_end,
              model.embeddings->values.begin());
  }
}

// ---------------------------------------------------------------------------
// Reference path over materialized fragments.

namespace {

void require_mode(const PotentialModel& model, bool want_embeddings) {
  if (want_embeddings && !model.embeddings) {
    throw ModeError("general_potential requires an embedding table");
  }
  if (!want_embeddings && model.embeddings) {
    throw ModeError("symmetric_potential called on a model with embeddings");
  }
}

}  // namespace

std::vector<double> symmetric_potential(const Fragment& fragment, const PotentialModel& model) {
  require_mode(model, false);
  if (fragment.k() != model.k) throw InvalidArgument("fragment size differs from model k");
  std::vector<double> sum(model.heads(), 0.0);
  if (!model.net) return sum;
  Tape tape;
  std::vector<double> input;
  for (const auto& code : anonymize(fragment)) {
    input.assign(code.bits.begin(), code.bits.end());
    const auto out = net_forward(*model.net, input, tape);
    for (int h = 0; h < model.heads(); ++h) sum[h] += out[h];
  }
  return sum;
}

std::vector<double> general_potential(const Fragment& fragment, const PotentialModel& model) {
  require_mode(model, true);
  if (fragment.k() != model.k) throw InvalidArgument("fragment size differs from model k");
  const auto& table = *model.embeddings;
  std::vector<double> sum(model.heads(), 0.0);
  Tape tape;
  std::vector<double> input;
  for (const auto& code : anonymize(fragment)) {
    input.assign(code.bits.begin(), code.bits.end());
    for (ConstantId c : code.from_anon) {
      if (c < 0 || static_cast<std::size_t>(c) >= table.rows()) {
        throw SignatureMismatch("constant " + std::to_string(c) + " missing from embedding table");
      }
      const auto row = table.row(c);
      input.insert(input.end(), row.begin(), row.end());
    }
    const auto out = net_forward(*model.net, input, tape);
    for (int h = 0; h < model.heads(); ++h) sum[h] += out[h];
  }
  return sum;
}

double indicator_potential(const Fragment& fragment, const IndicatorPotential& indicator) {
  const int k = fragment.k();
  if (indicator.formula.num_variables() > k) {
    throw InvalidArgument("indicator formula uses more variables than the fragment has constants");
  }
  std::size_t satisfied = 0;
  const auto codes = anonymize(fragment);
  for (const auto& code : codes) {
    if (indicator.formula.evaluate_code(code.bits, *fragment.signature, k)) ++satisfied;
  }
  return indicator.weight * static_cast<double>(satisfied) / static_cast<double>(codes.size());
}

std::vector<double> fragment_potentials(const Fragment& fragment, const PotentialModel& model) {
  std::vector<double> out = model.embeddings ? general_potential(fragment, model)
                                             : symmetric_potential(fragment, model);
  for (const auto& ind : model.indicators) out.push_back(indicator_potential(fragment, ind));
  return out;
}

std::vector<double> global_potential(const World& world, const PotentialModel& model) {
  const int n = static_cast<int>(world.signature().num_constants());
  if (n < model.k) throw InvalidArgument("global_potential: fewer constants than k");
  std::vector<double> sum(model.num_potentials(), 0.0);
  const auto fragments = enumerate_fragments(world, model.k);
  for (const auto& f : fragments) {
    const auto phi = fragment_potentials(f, model);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += phi[i];
  }
  for (auto& v : sum) v /= static_cast<double>(fragments.size());
  return sum;
}

double world_score(const World& world, const PotentialModel& model) {
  const auto phi = global_potential(world, model);
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += model.betas[i] * phi[i];
  if (!std::isfinite(s)) throw NumericError("world_score: non-finite score");
  return s;
}

double score_delta(const World& world, AtomIndex atom, const PotentialModel& model) {
  World scratch = world;
  Scorer scorer(model, world.signature_ptr());
  return scorer.score_delta(scratch, atom);
}

// ---------------------------------------------------------------------------
// Scorer

Scorer::Scorer(const PotentialModel& model, SignaturePtr signature, ScorerOptions options)
    : model_(&model), signature_(std::move(signature)) {
  model.validate(*signature_);
  const int k = model.k;
  const int n = static_cast<int>(signature_->num_constants());
  if (n < k) throw InvalidArgument("scorer: fewer constants than k");
  code_length_ = signature_->code_length(k);
  num_potentials_ = model.num_potentials();
  fragment_weight_ = 1.0 / static_cast<double>(binomial(n, k));
  inv_factorial_ = 1.0 / static_cast<double>(factorial(k));
  for (const auto& image : permutations(k)) {
    std::vector<int> inv(k);
    for (int j = 0; j < k; ++j) inv[image[j]] = j;
    inverse_perms_.push_back(std::move(inv));
  }
  use_memo_ = model.symmetric() && static_cast<int>(code_length_) <= options.memo_max_bits &&
              code_length_ <= 30;
  if (use_memo_) {
    const std::size_t entries = std::size_t{1} << code_length_;
    memo_.assign(entries * (num_potentials_ + 1), 0.0);
    memo_filled_.assign(entries, 0);
  }
  order_.resize(k);
  subset_scratch_.reserve(k);
  code_.resize(code_length_);
  raw_.resize(num_potentials_);
}

void Scorer::compute_raw(std::span<const std::uint8_t> code, std::span<const ConstantId> order,
                         std::span<double> out) {
  const auto& model = *model_;
  const int heads = model.heads();
  if (heads > 0) {
    input_.assign(code.begin(), code.end());
    if (model.embeddings) {
      for (ConstantId c : order) {
        const auto row = model.embeddings->row(c);
        input_.insert(input_.end(), row.begin(), row.end());
      }
    }
    const auto y = net_forward(*model.net, input_, tape_);
    std::copy(y.begin(), y.end(), out.begin());
  }
  for (std::size_t j = 0; j < model.indicators.size(); ++j) {
    const bool sat = model.indicators[j].formula.evaluate_code(code, *signature_, model.k);
    out[heads + j] = sat ? model.indicators[j].weight * inv_factorial_ : 0.0;
  }
}

const double* Scorer::memo_entry(std::uint64_t code) {
  double* entry = memo_.data() + code * (num_potentials_ + 1);
  if (!memo_filled_[code]) {
    for (std::size_t i = 0; i < code_length_; ++i) code_[i] = (code >> i) & 1U;
    compute_raw(code_, order_, std::span<double>(entry, num_potentials_));
    double dot = 0.0;
    for (std::size_t i = 0; i < num_potentials_; ++i) dot += model_->betas[i] * entry[i];
    entry[num_potentials_] = dot;
    memo_filled_[code] = 1;
  }
  return entry;
}

void Scorer::anonymization_potentials(const World& world, std::span<const ConstantId> order,
                                      std::span<double> out) {
  if (use_memo_) {
    const double* e = memo_entry(encode_packed(world, order));
    std::copy(e, e + num_potentials_, out.begin());
  } else {
    encode(world, order, code_);
    compute_raw(code_, order, out);
  }
}

void Scorer::fragment_potentials(const World& world, std::span<const ConstantId> subset,
                                 std::span<double> out) {
  if (static_cast<int>(subset.size()) != model_->k) {
    throw InvalidArgument("scorer: subset size differs from k");
  }
  ++fragments_evaluated_;
  std::fill(out.begin(), out.begin() + num_potentials_, 0.0);
  for_each_anonymization(subset, [&](std::span<const ConstantId> order) {
    anonymization_potentials(world, order, raw_);
    for (std::size_t i = 0; i < num_potentials_; ++i) out[i] += raw_[i];
  });
}

double Scorer::fragment_score(const World& world, std::span<const ConstantId> subset) {
  if (static_cast<int>(subset.size()) != model_->k) {
    throw InvalidArgument("scorer: subset size differs from k");
  }
  ++fragments_evaluated_;
  double s = 0.0;
  if (use_memo_) {
    for_each_anonymization(subset, [&](std::span<const ConstantId> order) {
      s += memo_entry(encode_packed(world, order))[num_potentials_];
    });
    return s;
  }
  for_each_anonymization(subset, [&](std::span<const ConstantId> order) {
    encode(world, order, code_);
    compute_raw(code_, order, raw_);
    double dot = 0.0;
    for (std::size_t i = 0; i < num_potentials_; ++i) dot += model_->betas[i] * raw_[i];
    s += dot;
  });
  return s;
}

std::vector<double> Scorer::global_potentials(const World& world) {
  const int n = static_cast<int>(signature_->num_constants());
  std::vector<double> sum(num_potentials_, 0.0);
  std::vector<double> phi(num_potentials_);
  std::vector<int> subset(model_->k);
  std::iota(subset.begin(), subset.end(), 0);
  do {
    fragment_potentials(world, subset, phi);
    for (std::size_t i = 0; i < num_potentials_; ++i) sum[i] += phi[i];
  } while (next_subset(subset, n));
  for (auto& v : sum) v *= fragment_weight_;
  return sum;
}

double Scorer::world_score(const World& world) {
  const int n = static_cast<int>(signature_->num_constants());
  double s = 0.0;
  std::vector<int> subset(model_->k);
  std::iota(subset.begin(), subset.end(), 0);
  do {
    s += fragment_score(world, subset);
  } while (next_subset(subset, n));
  s *= fragment_weight_;
  if (!std::isfinite(s)) throw NumericError("world_score: non-finite score");
  return s;
}

double Scorer::local_score(const World& world, std::span<const ConstantId> fixed) {
  const int k = model_->k;
  const int a = static_cast<int>(fixed.size());
  if (a > k) return 0.0;
  const int n = static_cast<int>(signature_->num_constants());
  std::vector<ConstantId> others;
  others.reserve(n - a);
  for (ConstantId c = 0; c < n; ++c) {
    if (std::find(fixed.begin(), fixed.end(), c) == fixed.end()) others.push_back(c);
  }
  const int free = k - a;
  std::vector<int> pick(free);
  std::iota(pick.begin(), pick.end(), 0);
  double s = 0.0;
  do {
    subset_scratch_.assign(fixed.begin(), fixed.end());
    for (int p : pick) subset_scratch_.push_back(others[p]);
    std::sort(subset_scratch_.begin(), subset_scratch_.end());
    s += fragment_score(world, subset_scratch_);
  } while (free > 0 && next_subset(pick, static_cast<int>(others.size())));
  return s;
}

double Scorer::conditional_logit(World& world, AtomIndex atom) {
  const auto constants = signature_->atom(atom).distinct_constants();
  if (static_cast<int>(constants.size()) > model_->k) return 0.0;
  const bool original = world.get(atom);
  world.set(atom, true);
  const double s1 = local_score(world, constants);
  world.set(atom, false);
  const double s0 = local_score(world, constants);
  world.set(atom, original);
  return (s1 - s0) * fragment_weight_;
}

double Scorer::score_delta(World& world, AtomIndex atom) {
  const double logit = conditional_logit(world, atom);
  return world.get(atom) ? -logit : logit;
}

// ---------------------------------------------------------------------------
// GradientAccumulator

GradientAccumulator::GradientAccumulator(const PotentialModel& model, SignaturePtr signature)
    : model_(&model), signature_(signature), scorer_(model, std::move(signature)) {
  statistics_.assign(model.num_potentials(), 0.0);
  scratch_.resize(model.num_potentials());
  code_.resize(signature_->code_length(model.k));
}

void GradientAccumulator::add_subset(const World& world, std::span<const ConstantId> subset,
                                     double weight) {
  scorer_.fragment_potentials(world, subset, scratch_);
  for (std::size_t i = 0; i < statistics_.size(); ++i) statistics_[i] += weight * scratch_[i];
  if (!model_->net) return;
  const bool with_order = model_->embeddings.has_value();
  scorer_.for_each_anonymization(subset, [&](std::span<const ConstantId> order) {
    encode(world, order, code_);
    std::string key(code_.begin(), code_.end());
    if (with_order) {
      for (ConstantId c : order) {
        char bytes[sizeof(ConstantId)];
        std::memcpy(bytes, &c, sizeof c);
        key.append(bytes, sizeof bytes);
      }
    }
    occurrences_[std::move(key)] += weight;
  });
}

void GradientAccumulator::add_world(const World& world, double weight) {
  const int n = static_cast<int>(signature_->num_constants());
  const double w = weight * scorer_.fragment_weight();
  std::vector<int> subset(model_->k);
  std::iota(subset.begin(), subset.end(), 0);
  do {
    add_subset(world, subset, w);
  } while (next_subset(subset, n));
  total_weight_ += weight;
}

void GradientAccumulator::add_fragments(const World& world,
                                        std::span<const std::vector<ConstantId>> subsets,
                                        double weight) {
  if (subsets.empty()) return;
  const double w = weight / static_cast<double>(subsets.size());
  for (const auto& s : subsets) add_subset(world, s, w);
  total_weight_ += weight;
}

std::vector<double> GradientAccumulator::gradient() const {
  const auto layout = parameter_layout(*model_);
  std::vector<double> grad(layout.embedding_end, 0.0);
  for (std::size_t i = 0; i < statistics_.size(); ++i) grad[layout.beta_begin + i] = statistics_[i];
  if (!model_->net) return grad;

  const auto& net = *model_->net;
  const int heads = model_->heads();
  const std::size_t len = code_.size();
  const int k = model_->k;
  const int dim = model_->embeddings ? model_->embeddings->dim : 0;

  // Fixed reduction order regardless of hash-map layout.
  std::vector<const std::pair<const std::string, double>*> entries;
  entries.reserve(occurrences_.size());
  for (const auto& kv : occurrences_) entries.push_back(&kv);
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });

  std::span<double> net_grad(grad.data() + layout.net_begin, layout.net_end - layout.net_begin);
  std::vector<double> input;
  std::vector<double> input_grad;
  std::vector<double> cot(heads);
  std::vector<ConstantId> order(k);
  Tape tape;
  for (const auto* e : entries) {
    const std::string& key = e->first;
    input.assign(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(len));
    if (dim > 0) {
      for (int j = 0; j < k; ++j) {
        std::memcpy(&order[j], key.data() + len + j * sizeof(ConstantId), sizeof(ConstantId));
        const auto row = model_->embeddings->row(order[j]);
        input.insert(input.end(), row.begin(), row.end());
      }
    }
    net_forward(net, input, tape);
    for (int h = 0; h < heads; ++h) cot[h] = model_->betas[h] * e->second;
    if (dim > 0) {
      input_grad.assign(input.size(), 0.0);
      net_backward(net, tape, cot, net_grad, input_grad);
      for (int j = 0; j < k; ++j) {
        double* row = grad.data() + layout.embedding_begin + static_cast<std::size_t>(order[j]) * dim;
        const double* src = input_grad.data() + len + static_cast<std::size_t>(j) * dim;
        for (int d = 0; d < dim; ++d) row[d] += src[d];
      }
    } else {
      net_backward(net, tape, cot, net_grad, {});
    }
  }
  return grad;
}

}  // namespace nmln
