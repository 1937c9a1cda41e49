#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spider/network.hpp"
#include "spider/tensor.hpp"

namespace spider {

enum class GeneratorKind {
  /// value = sum_r prod_k U_k[i_k, r]
  kMultilinearCp,
  /// value = MLP over the concatenated true embeddings, with weights zeroed at
  /// random.
  kRandomMlp,
};

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct MlpGeneratorOptions {
  std::vector<std::size_t> hidden{8};
  bnn::Activation activation = bnn::Activation::kTanh;
  /// Probability that each generator weight is set to exactly zero.
  double sparsity = 0.0;
};

struct SynthOptions {
  TensorShape shape;
  std::size_t rank = 3;
  ValueKind kind = ValueKind::kContinuous;
  GeneratorKind generator = GeneratorKind::kMultilinearCp;
  MlpGeneratorOptions mlp;
  double noise_sd = 0.1;
  std::size_t n_entries = 0;
  std::uint64_t seed = 0;
};

/// Everything needed to regenerate the noiseless values.
struct GroundTruth {
  GeneratorKind generator = GeneratorKind::kMultilinearCp;
  ValueKind kind = ValueKind::kContinuous;
  TensorShape shape;
  std::size_t rank = 0;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
  /// Per mode, rows x rank, row-major; entries drawn from N(0, 1).
  std::vector<std::vector<double>> embeddings;
  /// Random-MLP generator only.
  std::optional<bnn::NetworkSpec> network;
  std::vector<double> weights;
  double sparsity = 0.0;
  /// The sampled cells and their noiseless values (the latent output for
  /// binary data), in entry order.
  std::vector<std::vector<std::size_t>> indices;
  std::vector<double> noiseless;

  std::vector<double> input(std::span<const std::size_t> index) const;
  double evaluate(std::span<const std::size_t> index) const;

  bool operator==(const GroundTruth&) const = default;
};

struct SynthResult {
  std::vector<ObservedEntry> entries;
  GroundTruth truth;
};

/// Samples n distinct cells and their values. Continuous values get Gaussian
/// noise of sd noise_sd; binary labels are drawn as Bernoulli(Phi(value)).
SynthResult synth_generate(const SynthOptions& options);

inline constexpr int kTruthVersion = 1;

void save_truth(const GroundTruth& truth, std::ostream& out);
GroundTruth load_truth(std::istream& in);

}  // namespace spider
