#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

// Engine-versus-oracle comparisons shared by `spider verify` and the
// acceptance suite. Each check draws its own random cases from the seed.
namespace spider::selfcheck {

// Relative errors are |a - b| / max(|a|, |b|, kRelativeFloor) unless a check
// says otherwise, so coordinates that are exactly zero do not divide by zero.
inline constexpr double kRelativeFloor = 1e-3;

inline constexpr double kGradientTol = 1e-5;
inline constexpr double kMcRelativeTol = 0.15;
inline constexpr double kMcStandardErrors = 3.0;
inline constexpr double kBinaryEvidenceTol = 1e-10;
inline constexpr double kContinuousPartialTol = 1e-6;
inline constexpr double kConjugateTol = 1e-8;
inline constexpr double kTiltedTol = 1e-8;
inline constexpr double kTauTol = 1e-8;

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  /// Largest error seen, in the units the tolerance is stated in.
  double worst = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

double relative_error(double a, double b, double floor = kRelativeFloor);

/// Backprop against central differences of the reference forward pass on
/// random tanh networks with 2-3 layers and widths up to 10.
CheckResult check_gradient(std::size_t networks, std::uint64_t seed);

/// beta against Monte-Carlo output variance with all parameter variances at
/// most 1e-2. worst is the largest |beta - var| / allowed ratio (pass <= 1).
CheckResult check_output_moments(std::size_t networks, std::size_t samples, std::uint64_t seed);

/// log Z and d log Z / d alpha of the probit evidence against the reference
/// CDF, with z covering [-30, 30].
CheckResult check_binary_evidence(std::size_t cases, std::uint64_t seed);

/// Gaussian evidence partials against central differences.
CheckResult check_continuous_partials(std::size_t cases, std::uint64_t seed);

/// Single-weight identity network with the noise variance held fixed: the
/// ADF step against the exact conjugate update.
CheckResult check_conjugate(std::size_t cases, std::uint64_t seed);

/// refine_weight's tilted (Z, E[w], E[w^2]) against quadrature. The first case
/// is the symmetric one (m = 0, v = 1, sigma0^2 = 1, p = 0.5), where r1 must be
/// sqrt(2) - 1.
CheckResult check_tilted_moments(std::size_t cases, std::uint64_t seed);

/// Streams continuous entries and checks a = a0 + n/2 exactly and every rate
/// increment against 1/2 ((y - alpha)^2 + beta) from the reference forward
/// pass and finite-difference gradients.
CheckResult check_tau_recursion(std::size_t entries, std::uint64_t seed);

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::size_t gradient_networks = 100;
  std::size_t mc_networks = 5;
  std::size_t mc_samples = 200000;
  std::size_t evidence_cases = 2000;
  std::size_t conjugate_cases = 1000;
  std::size_t tilted_cases = 1000;
  std::size_t tau_entries = 300;
};

std::vector<CheckResult> run_suite(const SuiteOptions& options);

std::string format_result(const CheckResult& result);

}  // namespace spider::selfcheck
