#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nmln {

enum class Activation { identity, relu, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Fully connected feed-forward network. All parameters live in one flat
/// vector: for each layer, the weight matrix (row-major, out x in) followed by
/// the bias.
class DenseNet {
 public:
  DenseNet() = default;
  /// widths = {input, hidden..., output}; one activation per layer, the last of
  /// which must be identity.
  DenseNet(std::vector<int> widths, std::vector<Activation> activations);

  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  std::size_t num_layers() const { return activations_.size(); }
  const std::vector<int>& widths() const noexcept { return widths_; }
  const std::vector<Activation>& activations() const noexcept { return activations_; }

  std::size_t num_parameters() const noexcept { return params_.size(); }
  std::span<const double> parameters() const noexcept { return params_; }
  /// Mutable access; invalidates every outstanding Tape.
  std::span<double> mutable_parameters() noexcept {
    ++generation_;
    return params_;
  }

  double weight(std::size_t layer, int out, int in) const {
    return params_[weight_offset_[layer] + static_cast<std::size_t>(out) * widths_[layer] + in];
  }
  double bias(std::size_t layer, int out) const { return params_[bias_offset_[layer] + out]; }
  std::size_t weight_offset(std::size_t layer) const { return weight_offset_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return bias_offset_[layer]; }

  std::uint64_t generation() const noexcept { return generation_; }

 private:
  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::vector<double> params_;
  std::uint64_t generation_ = 0;
};

/// Activation cache of one forward pass, reusable across calls.
struct Tape {
  const DenseNet* net = nullptr;
  std::uint64_t generation = 0;
  /// values[0] is the input; values[l + 1] is the output of layer l.
  std::vector<std::vector<double>> values;

  std::span<const double> outputs() const { return values.back(); }
};

/// Forward pass; fills `tape` and returns its output view.
std::span<const double> net_forward(const DenseNet& net, std::span<const double> input, Tape& tape);

/// Reverse pass for <cotangent, outputs>. Gradients are ADDED into
/// `param_grads` (size num_parameters) and, when non-empty, `input_grads`.
/// Throws std::logic_error on a tape from another net or an older parameter
/// generation.
void net_backward(const DenseNet& net, const Tape& tape, std::span<const double> cotangent,
                  std::span<double> param_grads, std::span<double> input_grads);

}  // namespace nmln
