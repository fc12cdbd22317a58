#include "nmln/dense_net.hpp"

#include <cmath>
#include <stdexcept>

#include "nmln/errors.hpp"

namespace nmln {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<int> widths, std::vector<Activation> activations)
    : widths_(std::move(widths)), activations_(std::move(activations)) {
  if (widths_.size() < 2) throw InvalidArgument("dense net needs at least one layer");
  if (activations_.size() + 1 != widths_.size()) {
    throw InvalidArgument("dense net: one activation per layer required");
  }
  if (activations_.back() != Activation::identity) {
    throw InvalidArgument("dense net: final activation must be identity");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] < 1 || widths_[l + 1] < 1) throw InvalidArgument("dense net: empty layer");
    weight_offset_.push_back(offset);
    offset += static_cast<std::size_t>(widths_[l]) * widths_[l + 1];
    bias_offset_.push_back(offset);
    offset += widths_[l + 1];
  }
  params_.assign(offset, 0.0);
}

std::span<const double> net_forward(const DenseNet& net, std::span<const double> input, Tape& tape) {
  if (static_cast<int>(input.size()) != net.input_width()) {
    throw InvalidArgument("net_forward: input width " + std::to_string(input.size()) +
                          " != " + std::to_string(net.input_width()));
  }
  const auto& widths = net.widths();
  const auto params = net.parameters();
  tape.net = &net;
  tape.generation = net.generation();
  tape.values.resize(widths.size());
  tape.values[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const auto& x = tape.values[l];
    auto& y = tape.values[l + 1];
    y.resize(out);
    const double* w = params.data() + net.weight_offset(l);
    const double* b = params.data() + net.bias_offset(l);
    const Activation act = net.activations()[l];
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * x[i];
      switch (act) {
        case Activation::identity:
          break;
        case Activation::relu:
          s = s > 0.0 ? s : 0.0;
          break;
        case Activation::sigmoid:
          s = 1.0 / (1.0 + std::exp(-s));
          break;
      }
      y[o] = s;
    }
  }
  for (double v : tape.values.back()) {
    if (!std::isfinite(v)) throw NumericError("net_forward: non-finite output");
  }
  return tape.values.back();
}

void net_backward(const DenseNet& net, const Tape& tape, std::span<const double> cotangent,
                  std::span<double> param_grads, std::span<double> input_grads) {
  if (tape.net != &net || tape.generation != net.generation()) {
    throw std::logic_error("net_backward: stale or foreign tape");
  }
  if (static_cast<int>(cotangent.size()) != net.output_width()) {
    throw InvalidArgument("net_backward: cotangent width mismatch");
  }
  if (param_grads.size() != net.num_parameters()) {
    throw InvalidArgument("net_backward: parameter gradient size mismatch");
  }
  const auto& widths = net.widths();
  const auto params = net.parameters();
  std::vector<double> delta(cotangent.begin(), cotangent.end());
  std::vector<double> prev;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const auto& x = tape.values[l];
    const auto& y = tape.values[l + 1];
    // Through the activation: y = f(z).
    switch (net.activations()[l]) {
      case Activation::identity:
        break;
      case Activation::relu:
        for (int o = 0; o < out; ++o) {
          if (y[o] <= 0.0) delta[o] = 0.0;
        }
        break;
      case Activation::sigmoid:
        for (int o = 0; o < out; ++o) delta[o] *= y[o] * (1.0 - y[o]);
        break;
    }
    double* gw = param_grads.data() + net.weight_offset(l);
    double* gb = param_grads.data() + net.bias_offset(l);
    const double* w = params.data() + net.weight_offset(l);
    const bool need_prev = l > 0 || !input_grads.empty();
    if (need_prev) prev.assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* wrow = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * x[i];
      if (need_prev) {
        for (int i = 0; i < in; ++i) prev[i] += d * wrow[i];
      }
    }
    if (l == 0) {
      if (!input_grads.empty()) {
        for (int i = 0; i < in; ++i) input_grads[i] += prev[i];
      }
    } else {
      delta.swap(prev);
    }
  }
}

}  // namespace nmln
