#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "clickmine/common.hpp"

namespace clickmine::stats {

enum class Method { wrs_normal, wrs_exact, two_prop_z };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint() const { return 0.5 * (lo + hi); }
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::two_prop_z;
  std::optional<Interval> ci;
};

/// Two-sided 95% standard normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

double normal_cdf(double z);
/// Two-sided tail probability 2 * (1 - Phi(|z|)).
double normal_two_sided(double z);

/// Quantile by linear interpolation between order statistics (R type 7).
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> sample, double prob);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> x);

/// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> sample);
  double operator()(double x) const;
  /// Distinct jump locations with the cumulative mass reached at each.
  std::vector<std::pair<double, double>> steps() const;
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

/// Wilcoxon rank-sum test, two-sided. Exact permutation distribution of the
/// midrank sum when |a| + |b| <= kWrsExactLimit, otherwise the normal
/// approximation with tie and continuity corrections.
inline constexpr std::size_t kWrsExactLimit = 16;
TestResult wrs_test(std::span<const double> a, std::span<const double> b);

/// Midranks (1-based, ties averaged) of the pooled sample a ++ b.
std::vector<double> midranks(std::span<const double> pooled);

/// Exact two-sided rank-sum p-value for the pooled midranks where the first
/// `n_a` entries belong to sample a. Counts subsets by dynamic programming.
double wrs_exact_p(std::span<const double> ranks, std::size_t n_a);

/// Wilson score interval for x successes out of n trials. n = 0 gives
/// (0, 1), whose midpoint is 0.5.
Interval wilson_interval(std::uint64_t x, std::uint64_t n, double z = kZ95);

/// Pooled two-sided two-proportion z-test of x1/n1 against x0/n0. The
/// attached interval is the Wilson interval on x1 / (x1 + x0), the success
/// proportion among the units counted in either numerator.
TestResult two_prop_test(std::uint64_t x1, std::uint64_t n1, std::uint64_t x0, std::uint64_t n0);

/// The pooled z statistic alone; 0 when the pooled proportion is 0 or 1.
double two_prop_z(std::uint64_t x1, std::uint64_t n1, std::uint64_t x0, std::uint64_t n0);

}  // namespace clickmine::stats
