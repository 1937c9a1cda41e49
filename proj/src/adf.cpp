#include "spider/adf.hpp"

#include <cmath>
#include <numbers>

#include "spider/error.hpp"
#include "spider/gaussian.hpp"

namespace spider::adf {

EvidenceResult evidence_binary(double alpha, double beta, double y) {
  if (!(beta >= 0.0)) throw ArgumentError("beta must be nonnegative");
  const double sign = y > 0.5 ? 1.0 : -1.0;
  const double spread = std::sqrt(1.0 + beta);
  const double z = sign * alpha / spread;
  const double ratio = gauss::pdf_over_cdf(z);
  return {gauss::log_cdf(z), sign * ratio / spread, -ratio * z / (2.0 * (1.0 + beta))};
}

EvidenceResult evidence_continuous(double alpha, double beta, double y, const GammaPosterior& gamma) {
  if (!(beta >= 0.0)) throw ArgumentError("beta must be nonnegative");
  const double s = beta + gamma.b / gamma.a;
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericError("predictive variance underflowed");
  const double r = y - alpha;
  return {-0.5 * std::log(2.0 * std::numbers::pi * s) - r * r / (2.0 * s), r / s,
          -0.5 / s + r * r / (2.0 * s * s)};
}

GammaPosterior update_tau(const GammaPosterior& gamma, double y, double alpha, double beta) {
  const double r = y - alpha;
  return {gamma.a + 0.5, gamma.b + 0.5 * (r * r + beta)};
}

EvidenceResult entry_evidence(const ModelState& state, double alpha, double beta, double y) {
  if (state.kind() == ValueKind::kBinary) return evidence_binary(alpha, beta, y);
  return evidence_continuous(alpha, beta, y, *state.gamma());
}

EntryPartials entry_partials(const ModelState& state, const ObservedEntry& entry) {
  const GatheredEntry g = state.gather(entry.index);
  const auto& w = state.weights();
  bnn::Linearization lin;
  bnn::linearize(state.network(), w.mean, w.var, g.means, g.vars, lin);
  EntryPartials out;
  out.moments = lin.moments;
  out.evidence = entry_evidence(state, lin.moments.alpha, lin.moments.beta, entry.value);
  out.d_mean.resize(lin.gradient.size());
  out.d_var.resize(lin.gradient.size());
  for (std::size_t j = 0; j < lin.gradient.size(); ++j) {
    const double gj = lin.gradient[j];
    out.d_mean[j] = out.evidence.dlogz_dalpha * gj;
    out.d_var[j] = out.evidence.dlogz_dbeta * gj * gj;
  }
  return out;
}

namespace {

// Applies mu* = mu + v dmu, v* = v - v^2 (dmu^2 - 2 dv) with
// dmu = dalpha g, dv = dbeta g^2. Returns false if a mean turns non-finite.
bool match_moments(std::span<const double> mean, std::span<const double> var,
                   std::span<const double> grad, const EvidenceResult& ev,
                   std::vector<double>& new_mean, std::vector<double>& new_var, std::size_t& clamped) {
  new_mean.resize(mean.size());
  new_var.resize(var.size());
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double g = grad[j];
    const double dmu = ev.dlogz_dalpha * g;
    const double dv = ev.dlogz_dbeta * g * g;
    const double v = var[j];
    new_mean[j] = mean[j] + v * dmu;
    double v_new = v - v * v * (dmu * dmu - 2.0 * dv);
    if (!(v_new >= kVarianceFloor) || !std::isfinite(v_new)) {
      v_new = kVarianceFloor;
      ++clamped;
    }
    new_var[j] = v_new;
    if (!std::isfinite(new_mean[j])) return false;
  }
  return true;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

EntryResult update_entry(ModelState& state, const ObservedEntry& entry, Workspace& ws) {
  state.shape().check_index(entry.index);
  try {
    validate_entry(entry, state.shape(), state.kind());
  } catch (const ValueError& e) {
    throw ArgumentError(std::string("entry does not match the model's value kind: ") + e.what());
  }

  EntryResult result;
  const auto& spec = state.network();
  auto& weights = state.weights();
  state.gather(entry.index, ws.gathered);

  try {
    bnn::linearize(spec, weights.mean, weights.var, ws.gathered.means, ws.gathered.vars, ws.lin);
  } catch (const NumericError&) {
    result.skipped = true;
    return result;
  }
  const auto moments = ws.lin.moments;
  result.moments = moments;
  if (!std::isfinite(moments.alpha) || !std::isfinite(moments.beta) || !all_finite(ws.lin.gradient)) {
    result.skipped = true;
    return result;
  }

  const EvidenceResult ev = entry_evidence(state, moments.alpha, moments.beta, entry.value);
  if (!std::isfinite(ev.log_z) || !std::isfinite(ev.dlogz_dalpha) || !std::isfinite(ev.dlogz_dbeta)) {
    result.skipped = true;
    return result;
  }

  const std::size_t n_weights = spec.weight_count();
  const std::span<const double> grad(ws.lin.gradient);
  std::size_t clamped = 0;
  if (!match_moments(weights.mean, weights.var, grad.first(n_weights), ev, ws.weight_mean,
                     ws.weight_var, clamped) ||
      !match_moments(ws.gathered.means, ws.gathered.vars, grad.subspan(n_weights), ev,
                     ws.input_mean, ws.input_var, clamped)) {
    result.skipped = true;
    return result;
  }

  weights.mean.swap(ws.weight_mean);
  weights.var.swap(ws.weight_var);
  state.scatter(ws.gathered.locator, ws.input_mean, ws.input_var);
  if (state.kind() == ValueKind::kContinuous) {
    *state.gamma() = update_tau(*state.gamma(), entry.value, moments.alpha, moments.beta);
  }
  state.count_entry();

  result.log_z = ev.log_z;
  result.clamped = clamped;
  result.touched = spec.param_count();
  return result;
}

EntryResult update_entry(ModelState& state, const ObservedEntry& entry) {
  Workspace ws;
  return update_entry(state, entry, ws);
}

BatchReport process_batch(ModelState& state, const EntryBatch& batch, const EngineOptions& options) {
  BatchReport report;
  report.log_z.reserve(batch.entries.size());
  Workspace ws;
  for (const auto& entry : batch.entries) {
    const EntryResult r = update_entry(state, entry, ws);
    report.clamped += r.clamped;
    if (r.skipped) {
      ++report.skipped;
      report.log_z.push_back(std::nan(""));
      continue;
    }
    report.log_z.push_back(r.log_z);
    report.embedding_cells_touched += state.network().input_dim();
  }
  if (options.refine_every > 0 && (batch.ordinal + 1) % options.refine_every == 0) {
    report.refine = ep::refine_all(state, options.damping);
  }
  return report;
}

}  // namespace spider::adf
