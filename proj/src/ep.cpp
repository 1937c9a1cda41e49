#include "spider/ep.hpp"

#include <algorithm>
#include <cmath>

#include "spider/error.hpp"
#include "spider/gaussian.hpp"

namespace spider::ep {
namespace {

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

TiltedMoments spike_slab_tilted_moments(double cavity_mean, double cavity_var, double slab_prob,
                                        double slab_var) {
  if (!(cavity_var > 0.0) || !(slab_var > 0.0)) {
    throw ArgumentError("tilted moments need positive variances");
  }
  const double logit_p = gauss::logit(slab_prob);
  const double log_slab_height = gauss::log_density(0.0, cavity_mean, cavity_var + slab_var);
  const double log_spike_height = gauss::log_density(0.0, cavity_mean, cavity_var);
  const double log_slab = log_sigmoid(logit_p) + log_slab_height;
  const double log_spike = log_sigmoid(-logit_p) + log_spike_height;
  const double top = std::max(log_slab, log_spike);

  TiltedMoments t;
  t.log_z = top + std::log(std::exp(log_slab - top) + std::exp(log_spike - top));
  t.z = std::exp(t.log_z);
  t.slab_log_odds = logit_p + log_slab_height - log_spike_height;
  const double r1 = gauss::sigmoid(t.slab_log_odds);
  t.slab_responsibility = r1;

  const double v_slab = 1.0 / (1.0 / cavity_var + 1.0 / slab_var);
  const double m_slab = v_slab * cavity_mean / cavity_var;
  t.mean = r1 * m_slab;
  t.second_moment = r1 * (v_slab + m_slab * m_slab);
  return t;
}

WeightSlot read_slot(const WeightPosterior& w, std::size_t j) {
  return {w.mean[j], w.var[j], w.selector[j], w.term_mean[j], w.term_var[j], w.term_logit[j]};
}

void write_slot(WeightPosterior& w, std::size_t j, const WeightSlot& s) {
  w.mean[j] = s.mean;
  w.var[j] = s.var;
  w.selector[j] = s.selector;
  w.term_mean[j] = s.term_mean;
  w.term_var[j] = s.term_var;
  w.term_logit[j] = s.term_logit;
}

RefineResult refine_weight(const WeightSlot& slot, const Hyperparams& hyper, double damping) {
  if (!(damping > 0.0 && damping <= 1.0)) throw ArgumentError("damping must lie in (0, 1]");

  RefineResult result;
  result.slot = slot;

  const double cav_precision = 1.0 / slot.var - 1.0 / slot.term_var;
  if (!(cav_precision > 0.0) || !std::isfinite(cav_precision)) {
    result.outcome = RefineOutcome::kSkipped;
    return result;
  }
  const double cav_var = 1.0 / cav_precision;
  const double cav_shift = slot.mean / slot.var - slot.term_mean / slot.term_var;
  const double cav_mean = cav_var * cav_shift;

  // The selector posterior is Bern(rho0) x term, so its cavity is the model
  // prior; fall back to that directly if the stored probability saturated.
  double cav_logit = gauss::logit(slot.selector) - slot.term_logit;
  if (!std::isfinite(cav_logit)) cav_logit = gauss::logit(hyper.rho0);

  result.cavity_mean = cav_mean;
  result.cavity_var = cav_var;
  result.cavity_logit = cav_logit;

  const TiltedMoments tilted =
      spike_slab_tilted_moments(cav_mean, cav_var, gauss::sigmoid(cav_logit), hyper.sigma0_sq);
  result.tilted = tilted;

  // Var = r1 v_slab + r1 (1 - r1) m_slab^2, which avoids the cancellation in
  // E[w^2] - E[w]^2.
  const double r1 = tilted.slab_responsibility;
  const double v_slab = 1.0 / (1.0 / cav_var + 1.0 / hyper.sigma0_sq);
  const double m_slab = v_slab * cav_mean / cav_var;
  const double matched_mean = tilted.mean;
  const double matched_var = std::max(r1 * v_slab + r1 * (1.0 - r1) * m_slab * m_slab, kVarianceFloor);

  const double new_precision = 1.0 / matched_var - cav_precision;
  const double new_shift = matched_mean / matched_var - cav_shift;
  const double new_logit = tilted.slab_log_odds - cav_logit;

  const double old_precision = 1.0 / slot.term_var;
  const double old_shift = slot.term_mean / slot.term_var;
  const double damped_precision = (1.0 - damping) * old_precision + damping * new_precision;
  const double damped_shift = (1.0 - damping) * old_shift + damping * new_shift;
  const double damped_logit = (1.0 - damping) * slot.term_logit + damping * new_logit;

  WeightSlot& out = result.slot;
  if (damped_precision > 0.0 && std::isfinite(damped_precision)) {
    out.term_var = 1.0 / damped_precision;
    out.term_mean = damped_shift / damped_precision;
    out.term_logit = damped_logit;
    const double post_precision = cav_precision + damped_precision;
    out.var = std::max(1.0 / post_precision, kVarianceFloor);
    out.mean = (cav_shift + damped_shift) / post_precision;
    out.selector = gauss::sigmoid(cav_logit + damped_logit);
    result.outcome = RefineOutcome::kUpdated;
  } else {
    out.mean = matched_mean;
    out.var = matched_var;
    out.selector = r1;
    result.outcome = RefineOutcome::kTermKept;
  }
  return result;
}

RefineReport refine_all(ModelState& state, double damping) {
  RefineReport report;
  auto& weights = state.weights();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const RefineResult r = refine_weight(read_slot(weights, j), state.hyper(), damping);
    switch (r.outcome) {
      case RefineOutcome::kUpdated: ++report.updated; break;
      case RefineOutcome::kTermKept: ++report.term_kept; break;
      case RefineOutcome::kSkipped: ++report.skipped; break;
    }
    write_slot(weights, j, r.slot);
    if (r.slot.selector < 0.5) ++report.inhibited;
  }
  return report;
}

}  // namespace spider::ep
