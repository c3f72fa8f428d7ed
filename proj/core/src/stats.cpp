#include "fidelity/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <fmt/format.h>

#include "fidelity/error.hpp"
#include "fidelity/parallel.hpp"
#include "fidelity/text.hpp"

namespace fidelity::stats {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

double log_sum_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace

double chi2_sf_1dof(double x) {
  if (x <= 0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

double log10_chi2_sf_1dof(double x) {
  const double p = chi2_sf_1dof(x);
  if (p > 1e-300) return std::log10(p);
  // erfc(z) ~ exp(-z^2) / (z sqrt(pi)) * (1 - 1/(2z^2) + 3/(4z^4) - 15/(8z^6))
  const double z = std::sqrt(x / 2.0);
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / (2 * z2) + 3.0 / (4 * z2 * z2) - 15.0 / (8 * z2 * z2 * z2);
  const double ln = -z2 - std::log(z * std::sqrt(std::numbers::pi)) + std::log(series);
  return ln / std::numbers::ln10;
}

double log_binom_cdf_half(std::size_t k, std::size_t n) {
  if (k >= n) return 0.0;
  const double nn = static_cast<double>(n);
  const double base = std::lgamma(nn + 1) - nn * std::numbers::ln2;
  double acc = -INFINITY;
  for (std::size_t i = 0; i <= k; ++i) {
    const double ii = static_cast<double>(i);
    acc = log_sum_exp(acc, base - std::lgamma(ii + 1) - std::lgamma(nn - ii + 1));
  }
  return std::min(acc, 0.0);
}

McNemarResult mcnemar(std::size_t b, std::size_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const std::size_t n = b + c;
  if (n == 0) return r;

  const double diff = std::max(0.0, std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0);
  r.chi2_cc = diff * diff / static_cast<double>(n);
  r.p_chi2 = std::max(chi2_sf_1dof(r.chi2_cc), kTiny);
  r.log10_p_chi2 = log10_chi2_sf_1dof(r.chi2_cc);

  const double log_p = std::min(0.0, std::numbers::ln2 + log_binom_cdf_half(std::min(b, c), n));
  r.log10_p_exact = log_p / std::numbers::ln10;
  r.p_exact = std::max(std::exp(log_p), kTiny);
  return r;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(std::span<const double> values, std::size_t resamples, double level, std::uint64_t seed,
                      std::size_t jobs) {
  if (values.empty()) throw ValidationError("bootstrap of an empty sample");
  if (resamples == 0) throw ValidationError("bootstrap needs at least one resample");
  if (!(level > 0 && level < 1)) throw ValidationError("confidence level must be in (0, 1)");

  const std::size_t n = values.size();
  double sum = 0;
  for (double v : values) sum += v;

  std::vector<double> means(resamples);
  parallel_for(resamples, jobs, [&](std::size_t r) {
    std::mt19937_64 rng(text::mix64(seed ^ text::mix64(r + 1)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[pick(rng)];
    means[r] = s / static_cast<double>(n);
  });
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  return {sum / static_cast<double>(n), quantile_sorted(means, alpha / 2), quantile_sorted(means, 1 - alpha / 2)};
}

std::string format_ci(const Interval& ci, double scale, int decimals) {
  return fmt::format("{:.{}f} [{:.{}f}, {:.{}f}]", ci.estimate * scale, decimals, ci.lo * scale, decimals,
                     ci.hi * scale, decimals);
}

}  // namespace fidelity::stats
