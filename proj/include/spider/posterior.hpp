#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "spider/network.hpp"
#include "spider/random.hpp"
#include "spider/tensor.hpp"

namespace spider {

/// Smallest variance any stored Gaussian may hold.
inline constexpr double kVarianceFloor = 1e-10;

struct Hyperparams {
  double rho0 = 0.5;       // prior inclusion probability of each weight
  double sigma0_sq = 1.0;  // slab variance
  double a0 = 1.0;         // Gamma shape for the noise precision
  double b0 = 1.0;         // Gamma rate
  std::vector<std::size_t> ranks;  // embedding rank per mode

  void validate(std::size_t mode_count) const;
  std::size_t total_rank() const;
  bool operator==(const Hyperparams&) const = default;
};

/// Gaussian mean/variance per (node, rank) cell of one mode, row-major.
struct EmbeddingTable {
  std::size_t rows = 0;
  std::size_t rank = 0;
  std::vector<double> mean;
  std::vector<double> var;

  bool operator==(const EmbeddingTable&) const = default;
};

/// Per-weight posterior and spike-and-slab approximation term, stored as
/// parallel arrays in the network's flat weight order.
///
/// The posterior of weight j is N(mean[j], var[j]) with selector
/// Bern(selector[j]). Its prior term is N(term_mean[j], term_var[j]) times
/// Bern(sigmoid(term_logit[j])).
struct WeightPosterior {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> selector;
  std::vector<double> term_mean;
  std::vector<double> term_var;
  std::vector<double> term_logit;

  std::size_t size() const { return mean.size(); }
  bool operator==(const WeightPosterior&) const = default;
};

/// Gamma(a, b) posterior over the noise precision tau (shape a, rate b).
struct GammaPosterior {
  double a = 1.0;
  double b = 1.0;

  double mean() const { return a / b; }
  bool operator==(const GammaPosterior&) const = default;
};

/// Cells of the embedding tables read for one entry.
struct EntryLocator {
  std::vector<std::size_t> index;
  std::vector<std::size_t> ranks;
};

struct GatheredEntry {
  std::vector<double> means;
  std::vector<double> vars;
  EntryLocator locator;
};

class ModelState {
 public:
  /// Fresh state: embeddings N(0, 1); each weight term N(mu0, sigma0^2) with
  /// mu0 a standard normal truncated to [-sigma0, sigma0] and logit 0; weight
  /// posteriors equal to their terms; selectors at rho0; Gamma(a0, b0).
  static ModelState init(TensorShape shape, ValueKind kind, bnn::NetworkSpec network,
                         Hyperparams hyper, std::uint64_t seed);

  const TensorShape& shape() const { return shape_; }
  ValueKind kind() const { return kind_; }
  const bnn::NetworkSpec& network() const { return network_; }
  const Hyperparams& hyper() const { return hyper_; }

  std::span<const EmbeddingTable> embeddings() const { return embeddings_; }

  WeightPosterior& weights() { return weights_; }
  const WeightPosterior& weights() const { return weights_; }

  /// Present for continuous data only.
  std::optional<GammaPosterior>& gamma() { return gamma_; }
  const std::optional<GammaPosterior>& gamma() const { return gamma_; }

  std::uint64_t entries_seen() const { return entries_seen_; }
  void count_entry() { ++entries_seen_; }

  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  /// Concatenates the entry's embedding means and variances, mode 0 first and
  /// ascending rank within each mode.
  GatheredEntry gather(std::span<const std::size_t> index) const;
  void gather(std::span<const std::size_t> index, GatheredEntry& out) const;

  /// Writes back the cells named by a locator from gather(). Variances must be
  /// positive and finite.
  void scatter(const EntryLocator& locator, std::span<const double> means,
               std::span<const double> vars);

  /// Number of scalars held in the posterior tables.
  std::size_t stored_scalar_count() const;

  bool operator==(const ModelState&) const = default;

 private:
  friend ModelState load_checkpoint(std::istream& in);

  TensorShape shape_;
  ValueKind kind_ = ValueKind::kContinuous;
  bnn::NetworkSpec network_;
  Hyperparams hyper_;
  std::vector<EmbeddingTable> embeddings_;
  WeightPosterior weights_;
  std::optional<GammaPosterior> gamma_;
  std::uint64_t entries_seen_ = 0;
  Rng rng_;
};

inline constexpr int kCheckpointVersion = 1;

/// Writes a versioned JSON document naming every field.
void save_checkpoint(const ModelState& state, std::ostream& out);
ModelState load_checkpoint(std::istream& in);

}  // namespace spider
