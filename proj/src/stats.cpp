#include "clickmine/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clickmine::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_two_sided(double z) {
  return std::clamp(std::erfc(std::fabs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error("quantile probability outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> sample, double prob) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, prob);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

Ecdf::Ecdf(std::vector<double> sample) : sorted_(std::move(sample)) {
  if (sorted_.empty()) throw Error("ECDF of an empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

std::vector<std::pair<double, double>> Ecdf::steps() const {
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) {
    if (i + 1 < sorted_.size() && sorted_[i + 1] == sorted_[i]) continue;
    out.emplace_back(sorted_[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double wrs_exact_p(std::span<const double> ranks, std::size_t n_a) {
  const std::size_t n = ranks.size();
  if (n_a == 0 || n_a >= n) return 1.0;
  // Midranks are multiples of 1/2, so doubled ranks are exact integers.
  std::vector<long> twice(n);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    twice[i] = std::lround(2.0 * ranks[i]);
    total += twice[i];
  }
  long observed = 0;
  for (std::size_t i = 0; i < n_a; ++i) observed += twice[i];

  // ways[k][s]: number of k-subsets whose doubled rank sum is s.
  const auto max_sum = static_cast<std::size_t>(total);
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(twice[i]);
    for (std::size_t k = std::min(n_a, i + 1); k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (std::size_t s = max_sum; s >= r; --s) {
        dst[s] += src[s - r];
        if (s == r) break;
      }
    }
  }
  // Two-sided: |2W - 2E[W]| at least as large as observed; 2E[W] scaled by
  // n so the comparison stays integral.
  const long n_l = static_cast<long>(n);
  const long na_l = static_cast<long>(n_a);
  const long obs_dev = std::labs(n_l * observed - na_l * total);
  double extreme = 0.0;
  double all = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    const double c = ways[n_a][s];
    if (c == 0.0) continue;
    all += c;
    if (std::labs(n_l * static_cast<long>(s) - na_l * total) >= obs_dev) extreme += c;
  }
  return std::clamp(extreme / all, 0.0, 1.0);
}

TestResult wrs_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("wrs_test: empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const std::size_t na = a.size();
  const std::size_t n = pooled.size();
  double w = 0.0;
  for (std::size_t i = 0; i < na; ++i) w += ranks[i];

  TestResult res;
  res.statistic = w;
  if (n <= kWrsExactLimit) {
    res.method = Method::wrs_exact;
    res.p_value = wrs_exact_p(ranks, na);
    return res;
  }

  res.method = Method::wrs_normal;
  const double dn = static_cast<double>(n);
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(b.size());
  const double mu = dna * (dn + 1.0) / 2.0;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double dev = std::max(0.0, std::fabs(w - mu) - 0.5);
  res.p_value = normal_two_sided(dev / std::sqrt(var));
  return res;
}

Interval wilson_interval(std::uint64_t x, std::uint64_t n, double z) {
  if (x > n) throw Error("wilson_interval: successes exceed trials");
  if (n == 0) return {0.0, 1.0};
  const double dn = static_cast<double>(n);
  const double phat = static_cast<double>(x) / dn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / dn;
  const double center = (phat + z2 / (2.0 * dn)) / denom;
  const double half = z / denom * std::sqrt(phat * (1.0 - phat) / dn + z2 / (4.0 * dn * dn));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double two_prop_z(std::uint64_t x1, std::uint64_t n1, std::uint64_t x0, std::uint64_t n0) {
  const double d1 = static_cast<double>(n1);
  const double d0 = static_cast<double>(n0);
  const double pooled = static_cast<double>(x1 + x0) / (d1 + d0);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / d1 + 1.0 / d0));
  if (!(se > 0.0)) return 0.0;
  return (static_cast<double>(x1) / d1 - static_cast<double>(x0) / d0) / se;
}

TestResult two_prop_test(std::uint64_t x1, std::uint64_t n1, std::uint64_t x0, std::uint64_t n0) {
  if (n1 == 0 || n0 == 0) throw Error("two_prop_test: empty group");
  if (x1 > n1 || x0 > n0) throw Error("two_prop_test: count exceeds group size");
  TestResult res;
  res.method = Method::two_prop_z;
  res.statistic = two_prop_z(x1, n1, x0, n0);
  res.p_value = normal_two_sided(res.statistic);
  res.ci = wilson_interval(x1, x1 + x0);
  return res;
}

}  // namespace clickmine::stats
