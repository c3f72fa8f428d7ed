#include <cmath>
#include <random>

#include "doctest.h"
#include "fidelity/error.hpp"
#include "fidelity/stats.hpp"

using namespace fidelity;
using namespace fidelity::stats;

namespace {

long double chi2_oracle(std::size_t b, std::size_t c) {
  const long long d = std::llabs(static_cast<long long>(b) - static_cast<long long>(c)) - 1;
  const long long dd = d < 0 ? 0 : d;
  return static_cast<long double>(dd * dd) / static_cast<long double>(b + c);
}

// Exact two-sided binomial p with integer arithmetic; valid for n <= 120.
long double exact_p_small(unsigned b, unsigned c) {
  const unsigned n = b + c, k = std::min(b, c);
  unsigned __int128 coef = 1, tail = 0;
  for (unsigned i = 0; i <= k; ++i) {
    tail += coef;
    coef = coef * (n - i) / (i + 1);
  }
  long double p = 2.0L * static_cast<long double>(tail);
  for (unsigned i = 0; i < n; ++i) p /= 2.0L;
  return std::min(p, 1.0L);
}

// log10 of the two-sided exact p by term recurrence in long double.
long double log10_exact_p_large(std::size_t b, std::size_t c) {
  const std::size_t n = b + c, k = std::min(b, c);
  long double lt = -static_cast<long double>(n) * std::log(2.0L);
  long double acc = lt;
  for (std::size_t i = 1; i <= k; ++i) {
    lt += std::log(static_cast<long double>(n - i + 1)) - std::log(static_cast<long double>(i));
    const long double hi = std::max(acc, lt), lo = std::min(acc, lt);
    acc = hi + std::log1p(std::exp(lo - hi));
  }
  return std::min(0.0L, (acc + std::log(2.0L)) / std::log(10.0L));
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("McNemar statistic on large discordant counts") {
    const auto r = mcnemar(5356, 53);
    CHECK(r.b == 5356);
    CHECK(r.c == 53);
    const long double expect = 5302.0L * 5302.0L / 5409.0L;
    CHECK(std::fabs(static_cast<long double>(r.chi2_cc) - expect) < 1e-9L);
    CHECK(std::fabs(static_cast<long double>(r.chi2_cc) - chi2_oracle(5356, 53)) < 1e-9L);
    CHECK(r.chi2_cc == doctest::Approx(5197.2).epsilon(1e-4));
    CHECK(r.p_chi2 < 1e-10);
    CHECK(r.p_chi2 > 0.0);
    CHECK(r.p_exact > 0.0);
    CHECK(std::isfinite(r.log10_p_exact));
    CHECK(r.log10_p_exact < -300);
    CHECK(std::fabs(r.log10_p_exact - static_cast<double>(log10_exact_p_large(5356, 53))) <
          1e-9 * std::fabs(r.log10_p_exact));
    const long double chi_log = std::log10(std::erfc(std::sqrt(static_cast<long double>(r.chi2_cc) / 2)));
    CHECK(std::fabs(r.log10_p_chi2 - static_cast<double>(chi_log)) < 1e-9 * std::fabs(r.log10_p_chi2));
  }

  TEST_CASE("chi-square tail at known quantiles") {
    CHECK(chi2_sf_1dof(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi2_sf_1dof(6.634896601021214) == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(chi2_sf_1dof(10.827566170662733) == doctest::Approx(0.001).epsilon(1e-9));
    CHECK(chi2_sf_1dof(0) == 1.0);
    CHECK(log10_chi2_sf_1dof(3.841458820694124) == doctest::Approx(std::log10(0.05)).epsilon(1e-10));
  }

  TEST_CASE("exact p matches integer arithmetic for small tables") {
    for (unsigned b = 0; b <= 40; ++b) {
      for (unsigned c = 0; c <= 40; ++c) {
        if (b + c == 0) continue;
        const auto r = mcnemar(b, c);
        INFO(b, " ", c);
        CHECK(r.p_exact == doctest::Approx(static_cast<double>(exact_p_small(b, c))).epsilon(1e-9));
        CHECK(r.chi2_cc == doctest::Approx(static_cast<double>(chi2_oracle(b, c))).epsilon(1e-12));
        CHECK(r.p_exact > 0.0);
        CHECK(r.p_exact <= 1.0);
      }
    }
  }

  TEST_CASE("symmetry and degenerate cases") {
    std::mt19937 rng(1);
    for (int t = 0; t < 200; ++t) {
      const std::size_t b = rng() % 3000, c = rng() % 3000;
      const auto x = mcnemar(b, c), y = mcnemar(c, b);
      CHECK(x.chi2_cc == y.chi2_cc);
      CHECK(x.p_chi2 == y.p_chi2);
      CHECK(x.p_exact == y.p_exact);
    }
    const auto z = mcnemar(0, 0);
    CHECK(z.chi2_cc == 0.0);
    CHECK(z.p_chi2 == 1.0);
    CHECK(z.p_exact == 1.0);
    const auto eq = mcnemar(17, 17);
    CHECK(eq.chi2_cc == 0.0);
    CHECK(eq.p_chi2 == 1.0);
    CHECK(eq.p_exact == doctest::Approx(1.0));
    CHECK(mcnemar(1, 0).chi2_cc == 0.0);
  }

  TEST_CASE("extreme imbalance stays finite") {
    const auto r = mcnemar(200000, 0);
    CHECK(r.p_exact > 0.0);
    CHECK(r.p_chi2 > 0.0);
    CHECK(r.log10_p_exact == doctest::Approx(200000 * -std::log10(2.0) + std::log10(2.0)).epsilon(1e-9));
    CHECK(std::isfinite(r.log10_p_chi2));
  }

  TEST_CASE("bootstrap basics") {
    const std::vector<double> constant(50, 0.3);
    auto ci = bootstrap_ci(constant, 500, 0.95, 1);
    CHECK(ci.lo == doctest::Approx(0.3));
    CHECK(ci.hi == doctest::Approx(0.3));
    CHECK(ci.estimate == doctest::Approx(0.3));

    std::vector<double> v;
    std::mt19937 rng(3);
    for (int i = 0; i < 200; ++i) v.push_back(static_cast<double>(rng() % 2));
    const auto a = bootstrap_ci(v, 2000, 0.95, 42, 1);
    const auto b = bootstrap_ci(v, 2000, 0.95, 42, 4);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.lo <= a.estimate);
    CHECK(a.estimate <= a.hi);
    CHECK(a.lo >= 0.0);
    CHECK(a.hi <= 1.0);
    const auto narrow = bootstrap_ci(v, 2000, 0.80, 42);
    const auto wide = bootstrap_ci(v, 2000, 0.99, 42);
    CHECK(wide.lo <= narrow.lo);
    CHECK(wide.hi >= narrow.hi);
    CHECK_THROWS_AS(bootstrap_ci({}, 10), ValidationError);
    CHECK_THROWS_AS(bootstrap_ci(v, 10, 1.5), ValidationError);
  }

  TEST_CASE("bootstrap coverage on Bernoulli(0.5), n=300") {
    std::mt19937_64 rng(2025);
    std::bernoulli_distribution coin(0.5);
    int covered = 0;
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> v(300);
      for (auto& x : v) x = coin(rng) ? 1.0 : 0.0;
      const auto ci = bootstrap_ci(v, 1000, 0.95, static_cast<std::uint64_t>(rep), 1);
      covered += ci.lo <= 0.5 && 0.5 <= ci.hi;
    }
    CHECK(covered >= 184);
    CHECK(covered <= 196);
  }

  TEST_CASE("quantile interpolation") {
    const std::vector<double> s = {1, 2, 3, 4};
    CHECK(quantile_sorted(s, 0) == 1);
    CHECK(quantile_sorted(s, 1) == 4);
    CHECK(quantile_sorted(s, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(s, 1.0 / 3) == doctest::Approx(2.0));
  }

  TEST_CASE("interval formatting") {
    CHECK(format_ci({0.10333, 0.07, 0.14}, 100) == "10.3 [7.0, 14.0]");
    CHECK(format_ci({4.3567, 4.28, 4.43}, 1, 2) == "4.36 [4.28, 4.43]");
  }
}
