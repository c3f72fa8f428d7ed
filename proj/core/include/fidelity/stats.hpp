#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace fidelity::stats {

struct McNemarResult {
  std::size_t b = 0;  // first system right, second wrong
  std::size_t c = 0;  // first system wrong, second right
  double chi2_cc = 0;
  double p_chi2 = 1;
  double p_exact = 1;
  // Base-10 logs stay finite when the p-values underflow.
  double log10_p_chi2 = 0;
  double log10_p_exact = 0;
};

/// Continuity-corrected chi-square (1 dof) and two-sided exact binomial test
/// on the discordant counts. b + c == 0 gives chi2 = 0 and p = 1. Underflowing
/// p-values are clamped to the smallest positive normal double.
McNemarResult mcnemar(std::size_t b, std::size_t c);

/// Upper tail of chi-square with one degree of freedom.
double chi2_sf_1dof(double x);
double log10_chi2_sf_1dof(double x);
/// log P(X <= k) for X ~ Binomial(n, 1/2).
double log_binom_cdf_half(std::size_t k, std::size_t n);

struct Interval {
  double estimate = 0;
  double lo = 0;
  double hi = 0;
};

/// Percentile bootstrap of the mean. Resample r draws its indices from an
/// engine seeded by (seed, r), so results do not depend on `jobs`.
Interval bootstrap_ci(std::span<const double> values, std::size_t resamples = 10000, double level = 0.95,
                      std::uint64_t seed = 0, std::size_t jobs = 1);

/// Linear-interpolation quantile of sorted data, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// "10.3 [7.0, 14.0]" after multiplying by `scale`.
std::string format_ci(const Interval& ci, double scale = 1.0, int decimals = 1);

}  // namespace fidelity::stats
