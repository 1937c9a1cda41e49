#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spider/error.hpp"
#include "spider/network.hpp"
#include "spider/oracle.hpp"
#include "spider/random.hpp"

using namespace spider;

namespace {

double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("gaussian times gaussian normalizer") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const double m = 3.0 * rng.normal(), v = 0.01 + 4.0 * rng.uniform(), s2 = 0.05 + 5.0 * rng.uniform();
    const auto q = oracle::quad_tilted_moments(m, v, oracle::SpikeSlabMixture{1.0, s2});
    CHECK(std::abs(q.z - normal_pdf(0.0, m, v + s2)) < 1e-10);
    // Product of Gaussians: mean m s2 / (v + s2), variance v s2 / (v + s2).
    const double pv = v * s2 / (v + s2);
    const double pm = m * s2 / (v + s2);
    CHECK(q.mean == doctest::Approx(pm).epsilon(1e-10));
    CHECK(q.second_moment == doctest::Approx(pv + pm * pm).epsilon(1e-10));
  }
}

TEST_CASE("pure point mass") {
  const auto q = oracle::quad_tilted_moments(0.7, 0.3, oracle::SpikeSlabMixture{0.0, 1.0});
  CHECK(q.mean == 0.0);
  CHECK(q.second_moment == 0.0);
  CHECK(q.z == doctest::Approx(normal_pdf(0.0, 0.7, 0.3)).epsilon(1e-14));
}

TEST_CASE("gaussian times probit against the closed form") {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double m = 2.0 * rng.normal(), v = 0.05 + 3.0 * rng.uniform();
    const double a = 2.0 * rng.normal(), c = rng.normal();
    const auto q = oracle::quad_tilted_moments(m, v, oracle::ProbitFactor{a, c});
    // z = (a m + c) / sqrt(1 + a^2 v); mean = m + v R(z) dz/dm.
    const double den = std::sqrt(1.0 + a * a * v);
    const double z = (a * m + c) / den;
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double ratio = phi / cdf;
    CHECK(q.z == doctest::Approx(cdf).epsilon(1e-10));
    CHECK(q.mean == doctest::Approx(m + v * ratio * a / den).epsilon(1e-9));
    const double var = v - v * v * a * a / (den * den) * ratio * (z + ratio);
    CHECK(q.second_moment - q.mean * q.mean == doctest::Approx(var).epsilon(1e-8));
  }
  CHECK_THROWS_AS(oracle::quad_tilted_moments(0.0, 0.0, oracle::ProbitFactor{}), OracleError);
}

TEST_CASE("reference normal cdf") {
  CHECK(std::exp(oracle::reference_log_cdf(0.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::exp(oracle::reference_log_cdf(1.0)) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(oracle::reference_log_cdf(-30.0) == doctest::Approx(-454.3212439).epsilon(1e-9));
}

TEST_CASE("monte carlo moments") {
  const bnn::NetworkSpec s({2, 3, 1}, bnn::Activation::kTanh);
  Rng rng(3);
  std::vector<double> wm(s.weight_count()), xm{0.3, -0.7};
  for (auto& w : wm) w = rng.normal();
  const std::vector<double> zero_w(wm.size(), 0.0), zero_x(2, 0.0);
  const auto det = oracle::mc_output_moments(s, wm, zero_w, xm, zero_x, 1000, 1);
  CHECK(det.var < 1e-25);
  CHECK(det.mean == doctest::Approx(oracle::reference_forward(s, wm, xm)).epsilon(1e-14));

  const std::vector<double> wv(wm.size(), 0.01), xv(2, 0.02);
  const auto a = oracle::mc_output_moments(s, wm, wv, xm, xv, 5000, 9);
  const auto b = oracle::mc_output_moments(s, wm, wv, xm, xv, 5000, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.var == b.var);
  CHECK_THROWS_AS(oracle::mc_output_moments(s, wm, wv, xm, xv, 1, 9), OracleError);
}

TEST_CASE("monte carlo variance of a linear network is g' diag(gamma) g") {
  const bnn::NetworkSpec s({3, 4, 1}, bnn::Activation::kIdentity);
  Rng rng(4);
  std::vector<double> wm(s.weight_count()), xm(3);
  for (auto& w : wm) w = rng.normal();
  for (auto& x : xm) x = rng.normal();
  // With only the last layer uncertain, or only the inputs, f is linear in the
  // uncertain parameters and the first-order variance is exact.
  std::vector<double> wv(wm.size(), 0.0), xv(3, 0.0);
  for (std::size_t j = s.layer_offset(1); j < wv.size(); ++j) wv[j] = 0.05;
  const auto mc = oracle::mc_output_moments(s, wm, wv, xm, xv, 200000, 5);
  const auto m = bnn::output_moments(s, wm, wv, xm, xv);
  CHECK(std::abs(mc.var - m.beta) < 3.0 * mc.var_se);

  const std::vector<double> no_w(wm.size(), 0.0), only_x{0.1, 0.2, 0.3};
  const auto mc_x = oracle::mc_output_moments(s, wm, no_w, xm, only_x, 200000, 6);
  const auto m_x = bnn::output_moments(s, wm, no_w, xm, only_x);
  CHECK(std::abs(mc_x.var - m_x.beta) < 3.0 * mc_x.var_se);
}

TEST_CASE("finite differences") {
  const auto quad = [](std::span<const double> p) { return 3.0 * p[0] * p[0] - 2.0 * p[0] * p[1] + p[1]; };
  const std::vector<double> at{1.5, -0.5};
  const auto g = oracle::fd_gradient(quad, at);
  CHECK(g[0] == doctest::Approx(6.0 * 1.5 + 1.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(-3.0 + 1.0).epsilon(1e-9));
  CHECK_THROWS_AS(oracle::fd_gradient(quad, at, 0.0), OracleError);
}

TEST_CASE("finite differences catch a corrupted gradient") {
  const bnn::NetworkSpec s({2, 3, 1}, bnn::Activation::kTanh);
  Rng rng(6);
  std::vector<double> w(s.weight_count()), x{0.4, -1.1};
  for (auto& v : w) v = rng.normal();
  bnn::ForwardTape tape;
  bnn::forward_mean(s, w, x, tape);
  auto g = bnn::backprop_gradient(s, w, x, tape);
  g[4] += 1e-3;
  std::vector<double> point(w);
  point.insert(point.end(), x.begin(), x.end());
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> p) { return oracle::reference_forward(s, p.first(w.size()), p.subspan(w.size())); },
      point);
  std::size_t bad = 0;
  for (std::size_t j = 0; j < g.size(); ++j) bad += std::abs(g[j] - fd[j]) > 1e-5 * std::max(1e-3, std::abs(fd[j]));
  CHECK(bad == 1);
}

TEST_CASE("conjugate update") {
  const auto same = oracle::conjugate_linear_update(0.3, 2.0, 0.0, 5.0, 1.0);
  CHECK(same.mean == 0.3);
  CHECK(same.var == 2.0);
  const auto vague = oracle::conjugate_linear_update(0.3, 2.0, 1.5, 5.0, 1e12);
  CHECK(std::abs(vague.mean - 0.3) < 1e-10);
  CHECK(std::abs(vague.var - 2.0) < 1e-10);
  const auto exact = oracle::conjugate_linear_update(0.0, 1.0, 1.0, 2.0, 1.0);
  CHECK(exact.mean == doctest::Approx(1.0));
  CHECK(exact.var == doctest::Approx(0.5));
}
