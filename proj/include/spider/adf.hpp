#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "spider/ep.hpp"
#include "spider/network.hpp"
#include "spider/posterior.hpp"
#include "spider/tensor.hpp"

namespace spider::adf {

/// log Z of one entry under the current posterior and its partials with
/// respect to the output moments (alpha, beta).
struct EvidenceResult {
  double log_z = 0.0;
  double dlogz_dalpha = 0.0;
  double dlogz_dbeta = 0.0;
};

/// Probit likelihood: Z = Phi((2y - 1) alpha / sqrt(1 + beta)).
EvidenceResult evidence_binary(double alpha, double beta, double y);

/// Gaussian likelihood with tau replaced by its posterior mean:
/// Z = N(y | alpha, beta + b/a).
EvidenceResult evidence_continuous(double alpha, double beta, double y, const GammaPosterior& gamma);

/// a + 1/2, b + ((y - alpha)^2 + beta) / 2.
GammaPosterior update_tau(const GammaPosterior& gamma, double y, double alpha, double beta);

/// Evidence for one entry under the state's current posterior, dispatched on
/// the value kind.
EvidenceResult entry_evidence(const ModelState& state, double alpha, double beta, double y);

/// d log Z / d mean_j = dalpha g_j and d log Z / d var_j = dbeta g_j^2 for every
/// weight (flat order) followed by the entry's embedding cells (gather order).
/// The gradient g is held fixed, so beta's dependence on the means is ignored.
struct EntryPartials {
  EvidenceResult evidence;
  bnn::OutputMoments moments;
  std::vector<double> d_mean;
  std::vector<double> d_var;
};

EntryPartials entry_partials(const ModelState& state, const ObservedEntry& entry);

struct EntryResult {
  double log_z = 0.0;
  bnn::OutputMoments moments;
  bool skipped = false;
  /// Variances raised to kVarianceFloor.
  std::size_t clamped = 0;
  /// Parameters whose moments were recomputed (all weights + the entry's
  /// embedding cells).
  std::size_t touched = 0;
};

/// Scratch buffers reused across entries.
struct Workspace {
  GatheredEntry gathered;
  bnn::Linearization lin;
  std::vector<double> weight_mean;
  std::vector<double> weight_var;
  std::vector<double> input_mean;
  std::vector<double> input_var;
};

/// Moment-matching update of every weight and of the entry's embedding cells,
/// followed (continuous data) by the Gamma update with the pre-update alpha and
/// beta. Entries whose moments or gradient turn non-finite are skipped with the
/// state left unchanged.
EntryResult update_entry(ModelState& state, const ObservedEntry& entry, Workspace& ws);
EntryResult update_entry(ModelState& state, const ObservedEntry& entry);

struct EngineOptions {
  double damping = ep::kDefaultDamping;
  /// EP refinement after every n-th batch (by ordinal); 0 disables it.
  std::size_t refine_every = 1;
};

struct BatchReport {
  std::vector<double> log_z;
  std::size_t clamped = 0;
  std::size_t skipped = 0;
  std::size_t embedding_cells_touched = 0;
  std::optional<ep::RefineReport> refine;
};

/// Updates on each entry in arrival order, then refines the prior terms.
BatchReport process_batch(ModelState& state, const EntryBatch& batch,
                          const EngineOptions& options = {});

}  // namespace spider::adf
