#include "spider/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "spider/error.hpp"

namespace spider::bnn {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "tanh") return Activation::kTanh;
  throw ArgumentError("unknown activation '" + std::string(text) + "' (expected relu or tanh)");
}

Activation parse_any_activation(std::string_view text) {
  if (text == "identity") return Activation::kIdentity;
  return parse_activation(text);
}

NetworkSpec::NetworkSpec(std::vector<std::size_t> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
  if (widths_.size() < 2) throw ArgumentError("network needs at least one layer");
  for (auto w : widths_) {
    if (w == 0) throw ArgumentError("network widths must be positive");
  }
  if (widths_.back() != 1) throw ArgumentError("network output width must be 1");
  offsets_.assign(1, 0);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offsets_.back() + widths_[l + 1] * (widths_[l] + 1));
  }
}

NetworkSpec NetworkSpec::with_hidden(std::size_t input_dim, std::span<const std::size_t> hidden,
                                     Activation activation) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return NetworkSpec(std::move(widths), activation);
}

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// Derivative given the pre-activation x and the output y = activate(x).
// ReLU's derivative at exactly 0 is taken as 0.
double activate_derivative(Activation a, double x, double y) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

std::uint64_t fingerprint(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h ^ values.size();
}

void check_shapes(const NetworkSpec& spec, std::span<const double> weights,
                  std::span<const double> input) {
  if (weights.size() != spec.weight_count()) {
    throw ArgumentError("expected " + std::to_string(spec.weight_count()) + " weights, got " +
                        std::to_string(weights.size()));
  }
  if (input.size() != spec.input_dim()) {
    throw ArgumentError("expected input of length " + std::to_string(spec.input_dim()) +
                        ", got " + std::to_string(input.size()));
  }
}

}  // namespace

double forward_mean(const NetworkSpec& spec, std::span<const double> weights,
                    std::span<const double> input, ForwardTape& tape) {
  check_shapes(spec, weights, input);
  const std::size_t layers = spec.layer_count();
  tape.layer_input.resize(layers);
  tape.pre.resize(layers);
  tape.layer_input[0].assign(input.begin(), input.end());

  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = spec.width(l);
    const std::size_t fan_out = spec.width(l + 1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in + 1));
    const auto& h = tape.layer_input[l];
    auto& pre = tape.pre[l];
    pre.resize(fan_out);
    const double* row = weights.data() + spec.layer_offset(l);
    for (std::size_t j = 0; j < fan_out; ++j, row += fan_in + 1) {
      double acc = row[fan_in];
      for (std::size_t t = 0; t < fan_in; ++t) acc += row[t] * h[t];
      pre[j] = acc * scale;
      if (!std::isfinite(pre[j])) throw NumericError("non-finite activation in forward pass");
    }
    if (l + 1 < layers) {
      auto& next = tape.layer_input[l + 1];
      next.resize(fan_out);
      for (std::size_t j = 0; j < fan_out; ++j) next[j] = activate(spec.activation(), pre[j]);
    }
  }
  tape.output = tape.pre.back()[0];
  tape.weight_fingerprint = fingerprint(weights);
  return tape.output;
}

double forward_mean(const NetworkSpec& spec, std::span<const double> weights,
                    std::span<const double> input) {
  ForwardTape tape;
  return forward_mean(spec, weights, input, tape);
}

void backprop_gradient(const NetworkSpec& spec, std::span<const double> weights,
                       std::span<const double> input, const ForwardTape& tape,
                       std::span<double> gradient) {
  check_shapes(spec, weights, input);
  const std::size_t layers = spec.layer_count();
  if (gradient.size() != spec.param_count()) {
    throw ArgumentError("gradient buffer has wrong length");
  }
  if (tape.pre.size() != layers || tape.layer_input.size() != layers ||
      tape.layer_input[0].size() != input.size() ||
      !std::equal(input.begin(), input.end(), tape.layer_input[0].begin()) ||
      tape.weight_fingerprint != fingerprint(weights)) {
    throw ArgumentError("forward tape does not match the given weights and input");
  }

  std::vector<double> delta{1.0};
  std::vector<double> upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t fan_in = spec.width(l);
    const std::size_t fan_out = spec.width(l + 1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in + 1));
    const auto& h = tape.layer_input[l];
    const double* row = weights.data() + spec.layer_offset(l);
    double* grad_row = gradient.data() + spec.layer_offset(l);

    upstream.assign(fan_in, 0.0);
    for (std::size_t j = 0; j < fan_out; ++j, row += fan_in + 1, grad_row += fan_in + 1) {
      const double d = delta[j] * scale;
      for (std::size_t t = 0; t < fan_in; ++t) {
        grad_row[t] = d * h[t];
        upstream[t] += d * row[t];
      }
      grad_row[fan_in] = d;
    }

    if (l == 0) {
      std::copy(upstream.begin(), upstream.end(), gradient.begin() + spec.weight_count());
    } else {
      const auto& pre = tape.pre[l - 1];
      delta.resize(fan_in);
      for (std::size_t t = 0; t < fan_in; ++t) {
        delta[t] = upstream[t] * activate_derivative(spec.activation(), pre[t], h[t]);
      }
    }
  }
}

std::vector<double> backprop_gradient(const NetworkSpec& spec, std::span<const double> weights,
                                      std::span<const double> input, const ForwardTape& tape) {
  std::vector<double> gradient(spec.param_count());
  backprop_gradient(spec, weights, input, tape, gradient);
  return gradient;
}

namespace {

void check_variances(std::span<const double> vars, const char* what) {
  for (double v : vars) {
    if (!(v >= 0.0)) throw ArgumentError(std::string(what) + " variances must be nonnegative");
  }
}

}  // namespace

void linearize(const NetworkSpec& spec, std::span<const double> weight_means,
               std::span<const double> weight_vars, std::span<const double> input_means,
               std::span<const double> input_vars, Linearization& out) {
  if (weight_vars.size() != weight_means.size() || input_vars.size() != input_means.size()) {
    throw ArgumentError("mean and variance vectors differ in length");
  }
  check_variances(weight_vars, "weight");
  check_variances(input_vars, "input");

  out.moments.alpha = forward_mean(spec, weight_means, input_means, out.tape);
  out.gradient.resize(spec.param_count());
  backprop_gradient(spec, weight_means, input_means, out.tape, out.gradient);

  const std::size_t n_weights = spec.weight_count();
  double beta = 0.0;
  for (std::size_t j = 0; j < n_weights; ++j) {
    beta += out.gradient[j] * out.gradient[j] * weight_vars[j];
  }
  for (std::size_t j = 0; j < input_vars.size(); ++j) {
    const double g = out.gradient[n_weights + j];
    beta += g * g * input_vars[j];
  }
  out.moments.beta = beta;
}

OutputMoments output_moments(const NetworkSpec& spec, std::span<const double> weight_means,
                             std::span<const double> weight_vars,
                             std::span<const double> input_means,
                             std::span<const double> input_vars) {
  Linearization lin;
  linearize(spec, weight_means, weight_vars, input_means, input_vars, lin);
  return lin.moments;
}

}  // namespace spider::bnn
