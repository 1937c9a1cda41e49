#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace spider::bnn {

enum class Activation {
  kRelu,
  kTanh,
  /// Test-only; parse_activation never returns it.
  kIdentity,
};

std::string_view to_string(Activation activation);

/// Accepts "relu" or "tanh".
Activation parse_activation(std::string_view text);

/// Like parse_activation but also accepts "identity"; used when reloading
/// saved state.
Activation parse_any_activation(std::string_view text);

/// Layer widths V_0..V_M of the MLP mapping an entry's concatenated embeddings
/// to a scalar. Layer l (0-based, l < M) owns a V_{l+1} x (V_l + 1) matrix whose
/// last column multiplies the appended constant feature.
///
/// Flat parameter layout: the weights of layer 0, then layer 1, ..., each
/// matrix row-major; when input coordinates are included (gradients, moment
/// variances) they follow the weights in input order.
class NetworkSpec {
 public:
  NetworkSpec() = default;
  NetworkSpec(std::vector<std::size_t> widths, Activation activation);

  /// Builds V_0 = input_dim, the given hidden widths, and V_M = 1.
  static NetworkSpec with_hidden(std::size_t input_dim, std::span<const std::size_t> hidden,
                                 Activation activation);

  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t width(std::size_t level) const { return widths_[level]; }
  std::span<const std::size_t> widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  Activation activation() const { return activation_; }

  /// V: total weight count over all layers.
  std::size_t weight_count() const { return offsets_.back(); }
  /// V + V_0.
  std::size_t param_count() const { return weight_count() + input_dim(); }

  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t weight_index(std::size_t layer, std::size_t row, std::size_t col) const {
    return offsets_[layer] + row * (widths_[layer] + 1) + col;
  }

  bool operator==(const NetworkSpec& other) const {
    return widths_ == other.widths_ && activation_ == other.activation_;
  }

 private:
  std::vector<std::size_t> widths_;
  Activation activation_ = Activation::kRelu;
  std::vector<std::size_t> offsets_{0};
};

/// Intermediate values of one forward pass, reused by backprop_gradient.
struct ForwardTape {
  // layer_input[l] = h_l; layer_input[0] is the network input.
  std::vector<std::vector<double>> layer_input;
  // pre[l] = W_l [h_l; 1] / sqrt(V_l + 1); pre.back() holds the output.
  std::vector<std::vector<double>> pre;
  std::uint64_t weight_fingerprint = 0;
  double output = 0.0;
};

/// Evaluates f at the given weights and input, recording the tape.
double forward_mean(const NetworkSpec& spec, std::span<const double> weights,
                    std::span<const double> input, ForwardTape& tape);
double forward_mean(const NetworkSpec& spec, std::span<const double> weights,
                    std::span<const double> input);

/// Gradient of f with respect to every weight and input coordinate, in flat
/// layout. The tape must come from forward_mean on the same arguments.
void backprop_gradient(const NetworkSpec& spec, std::span<const double> weights,
                       std::span<const double> input, const ForwardTape& tape,
                       std::span<double> gradient);
std::vector<double> backprop_gradient(const NetworkSpec& spec, std::span<const double> weights,
                                      std::span<const double> input, const ForwardTape& tape);

/// Approximate posterior mean and variance of the network output.
struct OutputMoments {
  double alpha = 0.0;
  double beta = 0.0;
};

/// First-order expansion around the means: alpha = f(means) and
/// beta = sum_j g_j^2 gamma_j, gamma being the weight variances followed by the
/// input variances.
struct Linearization {
  OutputMoments moments;
  std::vector<double> gradient;
  ForwardTape tape;
};

void linearize(const NetworkSpec& spec, std::span<const double> weight_means,
               std::span<const double> weight_vars, std::span<const double> input_means,
               std::span<const double> input_vars, Linearization& out);

OutputMoments output_moments(const NetworkSpec& spec, std::span<const double> weight_means,
                             std::span<const double> weight_vars,
                             std::span<const double> input_means,
                             std::span<const double> input_vars);

}  // namespace spider::bnn
