#include "spider/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "spider/adf.hpp"
#include "spider/ep.hpp"
#include "spider/gaussian.hpp"
#include "spider/network.hpp"
#include "spider/oracle.hpp"
#include "spider/posterior.hpp"
#include "spider/random.hpp"
#include "spider/synth.hpp"

namespace spider::selfcheck {
namespace {

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::size_t size_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

// 2-3 layers (1-2 hidden), every width in [1, 10].
bnn::NetworkSpec random_tanh_net(Rng& rng) {
  std::vector<std::size_t> widths{size_in(rng, 1, 10)};
  const std::size_t hidden = size_in(rng, 1, 2);
  for (std::size_t h = 0; h < hidden; ++h) widths.push_back(size_in(rng, 1, 10));
  widths.push_back(1);
  return bnn::NetworkSpec(std::move(widths), bnn::Activation::kTanh);
}

std::vector<double> normals(Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

void finish(CheckResult& r) { r.passed = r.cases > 0 && r.worst <= r.tolerance; }

}  // namespace

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

CheckResult check_gradient(std::size_t networks, std::uint64_t seed) {
  CheckResult r{"gradient vs finite differences", false, 0, 0.0, kGradientTol, {}};
  Rng rng(seed);
  for (std::size_t n = 0; n < networks; ++n) {
    const auto spec = random_tanh_net(rng);
    const auto w = normals(rng, spec.weight_count());
    const auto x = normals(rng, spec.input_dim());
    bnn::ForwardTape tape;
    bnn::forward_mean(spec, w, x, tape);
    const auto g = bnn::backprop_gradient(spec, w, x, tape);

    std::vector<double> point(w);
    point.insert(point.end(), x.begin(), x.end());
    const std::size_t nw = w.size();
    const auto fd = oracle::fd_gradient(
        [&](std::span<const double> p) {
          return oracle::reference_forward(spec, p.first(nw), p.subspan(nw));
        },
        point);
    for (std::size_t j = 0; j < g.size(); ++j) r.worst = std::max(r.worst, relative_error(g[j], fd[j]));
    ++r.cases;
  }
  finish(r);
  return r;
}

CheckResult check_output_moments(std::size_t networks, std::size_t samples, std::uint64_t seed) {
  CheckResult r{"beta vs Monte-Carlo variance", false, 0, 0.0, 1.0, {}};
  Rng rng(seed);
  double worst_rel = 0.0;
  for (std::size_t n = 0; n < networks; ++n) {
    const auto spec = random_tanh_net(rng);
    const auto wm = normals(rng, spec.weight_count());
    const auto xm = normals(rng, spec.input_dim());
    std::vector<double> wv(wm.size());
    std::vector<double> xv(xm.size());
    for (auto& v : wv) v = uniform_in(rng, 1e-4, 1e-2);
    for (auto& v : xv) v = uniform_in(rng, 1e-4, 1e-2);

    const auto m = bnn::output_moments(spec, wm, wv, xm, xv);
    const auto mc = oracle::mc_output_moments(spec, wm, wv, xm, xv, samples, rng.next_u64());
    const double allowed = std::max(kMcStandardErrors * mc.var_se, kMcRelativeTol * mc.var);
    r.worst = std::max(r.worst, std::abs(m.beta - mc.var) / allowed);
    worst_rel = std::max(worst_rel, std::abs(m.beta - mc.var) / mc.var);
    ++r.cases;
  }
  r.detail = "worst relative gap " + short_number(worst_rel);
  finish(r);
  return r;
}

CheckResult check_binary_evidence(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"probit evidence vs reference CDF", false, 0, 0.0, kBinaryEvidenceTol, {}};
  Rng rng(seed);
  double worst_partial = 0.0;
  for (std::size_t n = 0; n < cases; ++n) {
    // Even cases sweep z over [-30, 30] on a grid; odd cases are random.
    const double z = n % 2 == 0 && cases > 1
                         ? -30.0 + 60.0 * static_cast<double>(n) / static_cast<double>(cases - 1)
                         : uniform_in(rng, -30.0, 30.0);
    const double beta = n % 3 == 0 ? 0.0 : uniform_in(rng, 0.0, 10.0);
    const double y = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const double sign = 2.0 * y - 1.0;
    const double alpha = sign * z * std::sqrt(1.0 + beta);

    const auto ev = adf::evidence_binary(alpha, beta, y);
    const double zz = sign * alpha / std::sqrt(1.0 + beta);
    const double ref_log = oracle::reference_log_cdf(zz);
    r.worst = std::max(r.worst, std::abs(ev.log_z - ref_log) / std::max(1.0, std::abs(ref_log)));
    r.worst = std::max(r.worst, std::abs(std::exp(ev.log_z) - std::exp(ref_log)));
    const double ref_dalpha = sign * oracle::reference_pdf_over_cdf(zz) / std::sqrt(1.0 + beta);
    worst_partial = std::max(worst_partial, relative_error(ev.dlogz_dalpha, ref_dalpha));
    ++r.cases;
  }
  r.detail = "worst d/dalpha relative error " + short_number(worst_partial);
  finish(r);
  if (worst_partial > 1e-8) r.passed = false;
  return r;
}

CheckResult check_continuous_partials(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"Gaussian evidence partials vs finite differences", false, 0, 0.0,
                kContinuousPartialTol, {}};
  Rng rng(seed);
  for (std::size_t n = 0; n < cases; ++n) {
    const double alpha = 2.0 * rng.normal();
    const double beta = uniform_in(rng, 0.0, 3.0);
    const double y = alpha + 2.0 * rng.normal();
    const GammaPosterior gamma{uniform_in(rng, 0.5, 5.0), uniform_in(rng, 0.1, 5.0)};
    const auto ev = adf::evidence_continuous(alpha, beta, y, gamma);
    const std::vector<double> at{alpha, beta};
    const auto fd = oracle::fd_gradient(
        [&](std::span<const double> p) {
          // Independent log N(y | p0, p1 + b/a).
          const double s = p[1] + gamma.b / gamma.a;
          const double res = y - p[0];
          return -0.5 * std::log(2.0 * std::numbers::pi * s) - res * res / (2.0 * s);
        },
        at);
    r.worst = std::max({r.worst, relative_error(ev.dlogz_dalpha, fd[0]),
                        relative_error(ev.dlogz_dbeta, fd[1])});
    ++r.cases;
  }
  finish(r);
  return r;
}

CheckResult check_conjugate(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"ADF step vs conjugate linear update", false, 0, 0.0, kConjugateTol, {}};
  Rng rng(seed);
  // f = (w x + b) / sqrt(2); only w is uncertain.
  const bnn::NetworkSpec spec({1, 1}, bnn::Activation::kIdentity);
  Hyperparams hyper;
  hyper.ranks = {1};
  constexpr double kPinned = 1e-30;
  for (std::size_t n = 0; n < cases; ++n) {
    auto state = ModelState::init(TensorShape({1}), ValueKind::kContinuous, spec, hyper, n);
    const double prior_mean = rng.normal();
    const double prior_var = uniform_in(rng, 0.05, 3.0);
    const double x = 2.0 * rng.normal();
    const double bias = rng.normal();
    const double noise_var = uniform_in(rng, 0.05, 2.0);
    const double y = 3.0 * rng.normal();

    auto& w = state.weights();
    w.mean = {prior_mean, bias};
    w.var = {prior_var, kPinned};
    const std::vector<std::size_t> index{0};
    auto g = state.gather(index);
    g.means[0] = x;
    g.vars[0] = kPinned;
    state.scatter(g.locator, g.means, g.vars);
    state.gamma() = GammaPosterior{1.0, noise_var};

    adf::update_entry(state, {{0}, y});
    const double scale = 1.0 / std::numbers::sqrt2;
    const auto c = oracle::conjugate_linear_update(prior_mean, prior_var, x * scale, y - bias * scale,
                                                   noise_var);
    r.worst = std::max(r.worst, std::abs(state.weights().mean[0] - c.mean) / std::max(1.0, std::abs(c.mean)));
    r.worst = std::max(r.worst, std::abs(state.weights().var[0] - c.var) / std::max(1.0, c.var));
    ++r.cases;
  }
  finish(r);
  return r;
}

CheckResult check_tilted_moments(std::size_t cases, std::uint64_t seed) {
  CheckResult r{"EP tilted moments vs quadrature", false, 0, 0.0, kTiltedTol, {}};
  Rng rng(seed);
  double symmetric_r1 = 0.0;
  for (std::size_t n = 0; n < cases; ++n) {
    double m_cav = 0.0, v_cav = 1.0, p_cav = 0.5;
    Hyperparams hyper;
    hyper.sigma0_sq = 1.0;
    if (n > 0) {
      m_cav = 2.0 * rng.normal();
      v_cav = std::exp(uniform_in(rng, std::log(1e-3), std::log(5.0)));
      p_cav = uniform_in(rng, 0.02, 0.98);
      hyper.sigma0_sq = std::exp(uniform_in(rng, std::log(0.05), std::log(20.0)));
    }
    // Build a posterior whose cavity is the one above.
    ep::WeightSlot slot;
    slot.term_var = uniform_in(rng, 0.5, 5.0) + v_cav;
    slot.term_mean = rng.normal();
    slot.term_logit = rng.normal();
    const double precision = 1.0 / v_cav + 1.0 / slot.term_var;
    slot.var = 1.0 / precision;
    slot.mean = slot.var * (m_cav / v_cav + slot.term_mean / slot.term_var);
    slot.selector = gauss::sigmoid(gauss::logit(p_cav) + slot.term_logit);

    const auto res = ep::refine_weight(slot, hyper, 1.0);
    if (!res.tilted) {
      r.worst = std::numeric_limits<double>::infinity();
      r.detail = "cavity rejected";
      break;
    }
    const auto q = oracle::quad_tilted_moments(
        res.cavity_mean, res.cavity_var,
        oracle::SpikeSlabMixture{gauss::sigmoid(res.cavity_logit), hyper.sigma0_sq});
    const auto& t = *res.tilted;
    r.worst = std::max(r.worst, std::abs(t.z - q.z) / q.z);
    r.worst = std::max(r.worst, std::abs(t.mean - q.mean) / std::max(1.0, std::abs(q.mean)));
    r.worst = std::max(r.worst, std::abs(t.second_moment - q.second_moment) /
                                    std::max(1.0, q.second_moment));
    if (n == 0) symmetric_r1 = t.slab_responsibility;
    ++r.cases;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "symmetric r1 %.8f", symmetric_r1);
  r.detail = buf;
  finish(r);
  if (std::abs(symmetric_r1 - (std::numbers::sqrt2 - 1.0)) > 1e-12) r.passed = false;
  return r;
}

CheckResult check_tau_recursion(std::size_t entries, std::uint64_t seed) {
  CheckResult r{"Gamma recursion", false, 0, 0.0, kTauTol, {}};
  SynthOptions so;
  so.shape = TensorShape({20, 15, 10});
  so.rank = 2;
  so.n_entries = entries;
  so.seed = seed;
  const auto data = synth_generate(so);

  Hyperparams hyper;
  hyper.ranks = {2, 2, 2};
  hyper.a0 = 1.5;
  hyper.b0 = 0.5;
  const auto spec = bnn::NetworkSpec::with_hidden(6, std::vector<std::size_t>{5}, bnn::Activation::kTanh);
  auto state = ModelState::init(so.shape, ValueKind::kContinuous, spec, hyper, seed + 1);
  const std::size_t nw = spec.weight_count();

  const auto batches = partition_stream(data.entries, 32, seed + 2);
  for (const auto& batch : batches) {
    for (const auto& e : batch.entries) {
      const auto g = state.gather(e.index);
      const auto& w = state.weights();
      std::vector<double> point(w.mean);
      point.insert(point.end(), g.means.begin(), g.means.end());
      std::vector<double> vars(w.var);
      vars.insert(vars.end(), g.vars.begin(), g.vars.end());
      auto f = [&](std::span<const double> p) {
        return oracle::reference_forward(spec, p.first(nw), p.subspan(nw));
      };
      const double alpha = f(point);
      const auto grad = oracle::fd_gradient(f, point);
      double beta = 0.0;
      for (std::size_t j = 0; j < grad.size(); ++j) beta += grad[j] * grad[j] * vars[j];

      const GammaPosterior before = *state.gamma();
      adf::update_entry(state, e);
      const GammaPosterior after = *state.gamma();
      const double expected = 0.5 * ((e.value - alpha) * (e.value - alpha) + beta);
      r.worst = std::max(r.worst, relative_error(after.b - before.b, expected));
      ++r.cases;
    }
    ep::refine_all(state, ep::kDefaultDamping);
  }
  const double n = static_cast<double>(r.cases);
  const bool shape_exact = state.gamma()->a == hyper.a0 + n / 2.0;
  r.detail = shape_exact ? "shape a0 + n/2 exact" : "shape drifted from a0 + n/2";
  finish(r);
  if (!shape_exact) r.passed = false;
  return r;
}

std::vector<CheckResult> run_suite(const SuiteOptions& o) {
  std::vector<CheckResult> out;
  out.push_back(check_gradient(o.gradient_networks, o.seed));
  out.push_back(check_output_moments(o.mc_networks, o.mc_samples, o.seed + 1));
  out.push_back(check_binary_evidence(o.evidence_cases, o.seed + 2));
  out.push_back(check_continuous_partials(o.evidence_cases, o.seed + 3));
  out.push_back(check_conjugate(o.conjugate_cases, o.seed + 4));
  out.push_back(check_tilted_moments(o.tilted_cases, o.seed + 5));
  out.push_back(check_tau_recursion(o.tau_entries, o.seed + 6));
  return out;
}

std::string format_result(const CheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %s: cases=%zu worst=%.3g tol=%.3g", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.cases, r.worst, r.tolerance);
  std::string s = buf;
  if (!r.detail.empty()) s += " (" + r.detail + ")";
  return s;
}

}  // namespace spider::selfcheck
