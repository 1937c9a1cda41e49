#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spider/network.hpp"

// Reference computations used to check the engine. None of them call into the
// engine's numerical code paths: the forward pass, densities and CDFs here are
// written out separately.

namespace spider::oracle {

/// Normalizer and raw moments of a tilted 1-D density (not normalized by the
/// cavity's own mass, which is 1).
struct QuadMoments {
  double z = 0.0;
  double mean = 0.0;
  double second_moment = 0.0;
};

/// Factor p N(w | 0, slab_var) + (1 - p) delta(w).
struct SpikeSlabMixture {
  double slab_prob = 0.5;
  double slab_var = 1.0;
};

/// Factor Phi(slope * w + offset).
struct ProbitFactor {
  double slope = 1.0;
  double offset = 0.0;
};

/// Adaptive Gauss-Kronrod quadrature of N(w | mean, var) x factor over the
/// continuous part; the spike is added analytically.
QuadMoments quad_tilted_moments(double cavity_mean, double cavity_var, const SpikeSlabMixture& mixture);
QuadMoments quad_tilted_moments(double cavity_mean, double cavity_var, const ProbitFactor& factor);

/// log Phi(z) from Boost's erfc, independent of the engine's CDF routines.
double reference_log_cdf(double z);
/// phi(z) / Phi(z) from the same reference functions.
double reference_pdf_over_cdf(double z);

/// Straight-line evaluation of the scaled MLP recursion.
double reference_forward(const bnn::NetworkSpec& spec, std::span<const double> weights,
                         std::span<const double> input);

struct McMoments {
  double mean = 0.0;
  double var = 0.0;
  double mean_se = 0.0;
  double var_se = 0.0;
};

/// Monte-Carlo mean and variance of the network output with every weight and
/// input coordinate drawn independently from its Gaussian.
McMoments mc_output_moments(const bnn::NetworkSpec& spec, std::span<const double> weight_means,
                            std::span<const double> weight_vars, std::span<const double> input_means,
                            std::span<const double> input_vars, std::size_t n_samples,
                            std::uint64_t seed);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences.
std::vector<double> fd_gradient(const ScalarFunction& f, std::span<const double> point,
                                double step = 1e-5);

struct ConjugateUpdate {
  double mean = 0.0;
  double var = 0.0;
};

/// Exact posterior of w under N(prior_mean, prior_var) after observing
/// y ~ N(x w, noise_var).
ConjugateUpdate conjugate_linear_update(double prior_mean, double prior_var, double x, double y,
                                        double noise_var);

}  // namespace spider::oracle
