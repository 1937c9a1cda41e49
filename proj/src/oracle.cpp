#include "spider/oracle.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "spider/error.hpp"
#include "spider/random.hpp"

namespace spider::oracle {
namespace {

double normal_density(double x, double mean, double var) {
  const double r = x - mean;
  return std::exp(-r * r / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

template <typename Weight>
QuadMoments integrate_moments(double mean, double var, Weight&& weight) {
  if (!(var > 0.0)) throw OracleError("cavity variance must be positive");
  using boost::math::quadrature::gauss_kronrod;
  // Beyond 40 standard deviations the cavity density is below exp(-800).
  const double sd = std::sqrt(var);
  const double lo = mean - 40.0 * sd;
  const double hi = mean + 40.0 * sd;

  QuadMoments out;
  double* slots[3] = {&out.z, &out.mean, &out.second_moment};
  for (int power = 0; power < 3; ++power) {
    auto integrand = [&](double w) {
      const double base = normal_density(w, mean, var) * weight(w);
      return power == 0 ? base : power == 1 ? w * base : w * w * base;
    };
    double error = 0.0;
    double l1 = 0.0;
    // Split at the mean so both halves are monotone in the cavity factor.
    double value = gauss_kronrod<double, 61>::integrate(integrand, lo, mean, 20, 1e-13, &error, &l1);
    double error2 = 0.0;
    value += gauss_kronrod<double, 61>::integrate(integrand, mean, hi, 20, 1e-13, &error2, &l1);
    if (error + error2 > 1e-11 * std::max(1.0, std::abs(value))) {
      throw OracleError("quadrature did not converge");
    }
    *slots[power] = value;
  }
  return out;
}

}  // namespace

QuadMoments quad_tilted_moments(double cavity_mean, double cavity_var, const SpikeSlabMixture& mixture) {
  const QuadMoments slab = integrate_moments(cavity_mean, cavity_var, [&](double w) {
    return mixture.slab_prob * normal_density(w, 0.0, mixture.slab_var);
  });
  // Point mass at 0 contributes (1 - p) q(0) to Z and nothing to w or w^2.
  const double spike = (1.0 - mixture.slab_prob) * normal_density(0.0, cavity_mean, cavity_var);
  QuadMoments out;
  out.z = slab.z + spike;
  out.mean = slab.mean / out.z;
  out.second_moment = slab.second_moment / out.z;
  return out;
}

QuadMoments quad_tilted_moments(double cavity_mean, double cavity_var, const ProbitFactor& factor) {
  QuadMoments raw = integrate_moments(cavity_mean, cavity_var, [&](double w) {
    return 0.5 * std::erfc(-(factor.slope * w + factor.offset) / std::numbers::sqrt2);
  });
  raw.mean /= raw.z;
  raw.second_moment /= raw.z;
  return raw;
}

double reference_log_cdf(double z) {
  return std::log(0.5 * boost::math::erfc(-z / std::numbers::sqrt2));
}

double reference_pdf_over_cdf(double z) {
  const double log_pdf = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  return std::exp(log_pdf - reference_log_cdf(z));
}

double reference_forward(const bnn::NetworkSpec& spec, std::span<const double> weights,
                         std::span<const double> input) {
  std::vector<double> h(input.begin(), input.end());
  std::size_t cursor = 0;
  const std::size_t layers = spec.widths().size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_in = spec.widths()[l];
    const std::size_t n_out = spec.widths()[l + 1];
    std::vector<double> next(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n_in; ++t) s += weights[cursor++] * h[t];
      s += weights[cursor++];  // bias column
      s /= std::sqrt(static_cast<double>(n_in) + 1.0);
      if (l + 1 < layers) {
        switch (spec.activation()) {
          case bnn::Activation::kRelu: s = std::max(s, 0.0); break;
          case bnn::Activation::kTanh: s = std::tanh(s); break;
          case bnn::Activation::kIdentity: break;
        }
      }
      next[j] = s;
    }
    h.swap(next);
  }
  if (cursor != weights.size()) throw OracleError("weight vector length does not match the network");
  return h.at(0);
}

McMoments mc_output_moments(const bnn::NetworkSpec& spec, std::span<const double> weight_means,
                            std::span<const double> weight_vars, std::span<const double> input_means,
                            std::span<const double> input_vars, std::size_t n_samples,
                            std::uint64_t seed) {
  if (n_samples < 2) throw OracleError("Monte Carlo needs at least two samples");
  Rng rng(seed);
  std::vector<double> w_sd(weight_vars.size());
  std::vector<double> x_sd(input_vars.size());
  for (std::size_t j = 0; j < w_sd.size(); ++j) w_sd[j] = std::sqrt(weight_vars[j]);
  for (std::size_t j = 0; j < x_sd.size(); ++j) x_sd[j] = std::sqrt(input_vars[j]);

  std::vector<double> w(weight_means.size());
  std::vector<double> x(input_means.size());
  std::vector<double> samples(n_samples);
  double sum = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = weight_means[j] + w_sd[j] * rng.normal();
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = input_means[j] + x_sd[j] * rng.normal();
    samples[s] = reference_forward(spec, w, x);
    sum += samples[s];
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : samples) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  McMoments out;
  out.mean = mean;
  out.var = m2 / (n - 1.0);
  m2 /= n;
  m4 /= n;
  out.mean_se = std::sqrt(out.var / n);
  out.var_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
  return out;
}

std::vector<double> fd_gradient(const ScalarFunction& f, std::span<const double> point, double step) {
  if (!(step > 0.0)) throw OracleError("finite-difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + step;
    const double up = f(x);
    x[j] = saved - step;
    const double down = f(x);
    x[j] = saved;
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

ConjugateUpdate conjugate_linear_update(double prior_mean, double prior_var, double x, double y,
                                        double noise_var) {
  const double precision = 1.0 / prior_var + x * x / noise_var;
  const double var = 1.0 / precision;
  return {var * (prior_mean / prior_var + x * y / noise_var), var};
}

}  // namespace spider::oracle
