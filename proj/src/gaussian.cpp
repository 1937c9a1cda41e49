#include "spider/gaussian.hpp"

#include <cmath>
#include <limits>

namespace spider::gauss {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Below this point Phi(z) is evaluated through the continued fraction for the
// Mills ratio rather than erfc, which loses relative accuracy and finally
// underflows in the deep tail.
constexpr double kTailCutoff = -5.0;

// Mills ratio m(x) = (1 - Phi(x)) / phi(x) for x >= 5, by Lentz's method on
//   m(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
double mills_ratio(double x) {
  constexpr double kTiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    d = x + k * d;
    if (d == 0.0) d = kTiny;
    c = x + k / c;
    if (c == 0.0) c = kTiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double log_cdf(double z) {
  if (z < kTailCutoff) return -0.5 * z * z - kLogSqrt2Pi + std::log(mills_ratio(-z));
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  return std::log(cdf(z));
}

double pdf_over_cdf(double z) {
  if (z < kTailCutoff) return 1.0 / mills_ratio(-z);
  return pdf(z) / cdf(z);
}

double log_density(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * std::log(var) - kLogSqrt2Pi - 0.5 * r * r / var;
}

double logit(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p) - std::log1p(-p);
}

}  // namespace spider::gauss
