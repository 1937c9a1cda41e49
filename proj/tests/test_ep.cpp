#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spider/ep.hpp"
#include "spider/error.hpp"
#include "spider/gaussian.hpp"
#include "spider/oracle.hpp"
#include "spider/selfcheck.hpp"

using namespace spider;

namespace {

// Slot whose cavity is N(m, v) with selector cavity probability p.
ep::WeightSlot slot_with_cavity(double m, double v, double p, double term_mean = 0.2,
                                double term_var = 3.0, double term_logit = 0.3) {
  ep::WeightSlot s;
  s.term_mean = term_mean;
  s.term_var = term_var;
  s.term_logit = term_logit;
  s.var = 1.0 / (1.0 / v + 1.0 / term_var);
  s.mean = s.var * (m / v + term_mean / term_var);
  s.selector = gauss::sigmoid(gauss::logit(p) + term_logit);
  return s;
}

double quad_slab_responsibility(double m, double v, double p, double slab_var) {
  const auto q = oracle::quad_tilted_moments(m, v, oracle::SpikeSlabMixture{p, slab_var});
  const double spike = (1.0 - p) * std::exp(-m * m / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
  return 1.0 - spike / q.z;
}

ModelState random_state(std::uint64_t seed) {
  Hyperparams h;
  h.ranks = {2, 2};
  auto s = ModelState::init(TensorShape(std::vector<std::size_t>{5, 5}), ValueKind::kContinuous,
                            bnn::NetworkSpec({4, 6, 1}, bnn::Activation::kTanh), h, seed);
  Rng rng(seed + 100);
  auto& w = s.weights();
  for (std::size_t j = 0; j < w.size(); ++j) {
    // Posterior = some likelihood information times the current term.
    const double lik_precision = 0.5 + 20.0 * rng.uniform();
    const double lik_shift = lik_precision * 1.5 * rng.normal();
    const double precision = lik_precision + 1.0 / w.term_var[j];
    w.var[j] = 1.0 / precision;
    w.mean[j] = w.var[j] * (lik_shift + w.term_mean[j] / w.term_var[j]);
  }
  return s;
}

}  // namespace

TEST_CASE("symmetric case") {
  const auto t = ep::spike_slab_tilted_moments(0.0, 1.0, 0.5, 1.0);
  CHECK(t.slab_responsibility == doctest::Approx(std::numbers::sqrt2 - 1.0).epsilon(1e-14));
  CHECK(t.slab_responsibility == doctest::Approx(0.41421).epsilon(1e-5));
  CHECK(t.mean == 0.0);
  const double heights = 0.5 / std::sqrt(4.0 * std::numbers::pi) + 0.5 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(t.z == doctest::Approx(heights).epsilon(1e-14));

  Hyperparams h;
  const auto r = ep::refine_weight(slot_with_cavity(0.0, 1.0, 0.5), h, 1.0);
  REQUIRE(r.tilted.has_value());
  CHECK(r.cavity_mean == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r.cavity_var == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.tilted->slab_responsibility == doctest::Approx(std::numbers::sqrt2 - 1.0).epsilon(1e-12));
}

TEST_CASE("a wider slab explains a distant cavity better") {
  // Holds while cavity variance + slab variance stays below m^2.
  for (double m : {-3.0, 2.5, 3.0}) {
    double prev = 0.0;
    for (double slab_var : {0.05, 0.1, 0.3, 1.0, 2.0, 4.0, 5.5}) {
      const double r1 = ep::spike_slab_tilted_moments(m, 0.5, 0.5, slab_var).slab_responsibility;
      CHECK(r1 == doctest::Approx(quad_slab_responsibility(m, 0.5, 0.5, slab_var)).epsilon(1e-10));
      CHECK(r1 > prev);
      prev = r1;
    }
  }
}

TEST_CASE("a confident distant cavity selects the slab") {
  const auto t = ep::spike_slab_tilted_moments(5.0, 0.01, 0.5, 1.0);
  CHECK(t.slab_responsibility > 0.999999);
  CHECK(std::isfinite(t.slab_log_odds));
  const auto far = ep::spike_slab_tilted_moments(50.0, 0.01, 0.5, 1.0);
  CHECK(far.slab_responsibility == 1.0);
  CHECK(std::isfinite(far.log_z));
}

TEST_CASE("tilted moments agree with quadrature") {
  const auto r = selfcheck::check_tilted_moments(300, 9);
  CHECK_MESSAGE(r.passed, selfcheck::format_result(r));
}

TEST_CASE("selector stays strictly inside (0, 1)") {
  Rng rng(3);
  Hyperparams h;
  for (int i = 0; i < 500; ++i) {
    const double p = 0.01 + 0.98 * rng.uniform();
    const double damping = 0.1 + 0.9 * rng.uniform();
    const auto r = ep::refine_weight(slot_with_cavity(3.0 * rng.normal(), 0.01 + rng.uniform(), p), h, damping);
    REQUIRE(r.tilted.has_value());
    // Log-odds of the new selector; beyond about 36 a double rounds it to 0 or 1.
    const double log_odds = (1.0 - damping) * (gauss::logit(p) + 0.3) + damping * r.tilted->slab_log_odds;
    CHECK(r.slot.selector >= 0.0);
    CHECK(r.slot.selector <= 1.0);
    if (std::abs(log_odds) < 30.0) {
      CHECK(r.slot.selector > 0.0);
      CHECK(r.slot.selector < 1.0);
      if (r.outcome == ep::RefineOutcome::kUpdated && std::abs(log_odds) < 20.0)
        CHECK(gauss::logit(r.slot.selector) == doctest::Approx(log_odds).epsilon(1e-6));
    }
    CHECK(r.slot.var > 0.0);
    CHECK(r.slot.term_var > 0.0);
  }
}

TEST_CASE("posterior is cavity times the damped term") {
  Hyperparams h;
  h.sigma0_sq = 2.0;
  const auto slot = slot_with_cavity(0.4, 0.2, 0.6, -0.1, 1.5, 0.2);
  const auto full = ep::refine_weight(slot, h, 1.0);
  const auto half = ep::refine_weight(slot, h, 0.5);
  REQUIRE(full.outcome == ep::RefineOutcome::kUpdated);
  REQUIRE(half.outcome == ep::RefineOutcome::kUpdated);

  // Undamped: the posterior is exactly the matched moments.
  const auto& t = *full.tilted;
  CHECK(full.slot.mean == doctest::Approx(t.mean).epsilon(1e-12));
  CHECK(full.slot.var == doctest::Approx(t.second_moment - t.mean * t.mean).epsilon(1e-10));
  CHECK(full.slot.selector == doctest::Approx(t.slab_responsibility).epsilon(1e-12));

  // Damped: term natural parameters are the average of old and new.
  const double prec_old = 1.0 / slot.term_var, prec_new = 1.0 / full.slot.term_var;
  CHECK(1.0 / half.slot.term_var == doctest::Approx(0.5 * (prec_old + prec_new)).epsilon(1e-12));
  CHECK(half.slot.term_logit == doctest::Approx(0.5 * (slot.term_logit + full.slot.term_logit)).epsilon(1e-12));
  const double cav_prec = 1.0 / half.cavity_var;
  CHECK(1.0 / half.slot.var == doctest::Approx(cav_prec + 1.0 / half.slot.term_var).epsilon(1e-12));
}

TEST_CASE("guards") {
  Hyperparams h;
  ep::WeightSlot wide;
  wide.var = 2.0;
  wide.term_var = 1.0;
  const auto r = ep::refine_weight(wide, h, 0.5);
  CHECK(r.outcome == ep::RefineOutcome::kSkipped);
  CHECK(r.slot.var == wide.var);
  CHECK(r.slot.mean == wide.mean);
  CHECK_FALSE(r.tilted.has_value());

  CHECK_THROWS_AS(ep::refine_weight(wide, h, 0.0), ArgumentError);
  CHECK_THROWS_AS(ep::refine_weight(wide, h, 1.5), ArgumentError);

  // A bimodal tilted distribution is wider than the cavity: the term is kept.
  const auto slot = slot_with_cavity(1.0, 0.1, 0.5);
  const auto kept = ep::refine_weight(slot, h, 1.0);
  REQUIRE(kept.outcome == ep::RefineOutcome::kTermKept);
  CHECK(kept.slot.term_mean == slot.term_mean);
  CHECK(kept.slot.term_var == slot.term_var);
  CHECK(kept.slot.term_logit == slot.term_logit);
  CHECK(kept.slot.mean == doctest::Approx(kept.tilted->mean));
  CHECK(kept.slot.selector == doctest::Approx(kept.tilted->slab_responsibility));
}

TEST_CASE("a tight posterior at zero goes to the spike") {
  Hyperparams h;
  ep::WeightSlot s;
  s.mean = 0.0;
  s.var = 1e-6;
  s.term_mean = 0.3;
  s.term_var = 1.0;
  s.term_logit = 0.0;
  s.selector = 0.5;
  const auto r = ep::refine_weight(s, h, 1.0);
  // p N(0|0, 1) / ((1-p) N(0|0, 1e-6)) ~ 1e-3.
  CHECK(r.slot.selector < 2e-3);
  CHECK(std::abs(r.slot.mean) < 1e-6);
}

TEST_CASE("refine_all contracts and leaves embeddings alone") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = random_state(seed);
    const auto embeddings_before = std::vector<EmbeddingTable>(s.embeddings().begin(), s.embeddings().end());
    const auto w0 = s.weights();
    const auto report = ep::refine_all(s, 0.5);
    CHECK(report.updated + report.term_kept + report.skipped == w0.size());
    const auto w1 = s.weights();
    ep::refine_all(s, 0.5);
    const auto w2 = s.weights();
    double first = 0.0, second = 0.0;
    for (std::size_t j = 0; j < w0.size(); ++j) {
      first += std::abs(w1.mean[j] - w0.mean[j]) + std::abs(w1.var[j] - w0.var[j]);
      second += std::abs(w2.mean[j] - w1.mean[j]) + std::abs(w2.var[j] - w1.var[j]);
    }
    CHECK(second < first);
    CHECK(std::equal(embeddings_before.begin(), embeddings_before.end(), s.embeddings().begin()));
    CHECK(s.gamma() == ModelState::init(s.shape(), s.kind(), s.network(), s.hyper(), seed).gamma());
  }
}
