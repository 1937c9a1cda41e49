#pragma once

#include <cmath>

namespace spider::gauss {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal density.
double pdf(double z);

/// Standard normal CDF.
double cdf(double z);

/// log Phi(z), accurate far into the lower tail.
double log_cdf(double z);

/// phi(z) / Phi(z). Stable for z << 0, where it approaches -z.
double pdf_over_cdf(double z);

/// log N(x | mean, var).
double log_density(double x, double mean, double var);

double logit(double p);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace spider::gauss
