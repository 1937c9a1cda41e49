#pragma once

#include <cstddef>
#include <optional>

#include "spider/posterior.hpp"

// Expectation-propagation refinement of each weight's spike-and-slab prior
// term. The update is standard spike-and-slab EP: divide the term out of the
// posterior to get the cavity, match the moments of cavity x exact prior
// (slab N(0, sigma0^2) gated by the selector, spike an exact point mass at 0),
// and divide the cavity back out to obtain the new term.

namespace spider::ep {

inline constexpr double kDefaultDamping = 0.5;

/// Normalizer and first two moments of
///   q_cav(w) [p N(w | 0, slab_var) + (1 - p) delta(w)],  q_cav = N(mean, var).
struct TiltedMoments {
  double z = 0.0;
  double log_z = 0.0;
  double mean = 0.0;
  double second_moment = 0.0;
  /// Posterior probability of the slab branch, r1.
  double slab_responsibility = 0.0;
  /// log-odds of r1; finite even when r1 rounds to 0 or 1.
  double slab_log_odds = 0.0;
};

TiltedMoments spike_slab_tilted_moments(double cavity_mean, double cavity_var,
                                        double slab_prob, double slab_var);

/// One weight's posterior and prior term (see WeightPosterior).
struct WeightSlot {
  double mean = 0.0;
  double var = 1.0;
  double selector = 0.5;
  double term_mean = 0.0;
  double term_var = 1.0;
  double term_logit = 0.0;
};

WeightSlot read_slot(const WeightPosterior& w, std::size_t j);
void write_slot(WeightPosterior& w, std::size_t j, const WeightSlot& slot);

enum class RefineOutcome {
  kUpdated,
  /// The damped term had nonpositive precision: the old term is kept and only
  /// the posterior moves to the matched moments.
  kTermKept,
  /// Nonpositive cavity precision: nothing changes.
  kSkipped,
};

struct RefineResult {
  WeightSlot slot;
  RefineOutcome outcome = RefineOutcome::kSkipped;
  double cavity_mean = 0.0;
  double cavity_var = 0.0;
  double cavity_logit = 0.0;
  std::optional<TiltedMoments> tilted;
};

/// Damping in (0, 1] mixes the old and newly computed term in natural
/// parameters; the posterior is then rebuilt as cavity x damped term.
RefineResult refine_weight(const WeightSlot& slot, const Hyperparams& hyper, double damping);

struct RefineReport {
  std::size_t updated = 0;
  std::size_t term_kept = 0;
  std::size_t skipped = 0;
  /// Weights whose selector probability ended below 0.5.
  std::size_t inhibited = 0;
};

/// Refines every weight once. Embeddings are not touched.
RefineReport refine_all(ModelState& state, double damping);

}  // namespace spider::ep
