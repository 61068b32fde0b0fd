#pragma once

// Rank-based tests: Kruskal-Wallis with tie correction and the two-sided
// Mann-Whitney U test (exact under ties for small samples, normal
// approximation otherwise).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "arousal/core/error.hpp"

namespace arousal {

namespace detail {

// Midranks (1-based) of `pooled` and the sizes of its tie groups.
inline std::vector<double> midranks(const std::vector<double>& pooled, std::vector<std::size_t>* ties = nullptr) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> rank(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    if (ties) ties->push_back(j - i + 1);
    i = j + 1;
  }
  return rank;
}

inline double tie_sum(const std::vector<std::size_t>& ties) {
  double s = 0.0;
  for (auto t : ties) {
    const double d = static_cast<double>(t);
    s += d * d * d - d;
  }
  return s;
}

}  // namespace detail

// Upper tail of the chi-squared distribution.
inline double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

// Upper tail of the standard normal distribution.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct KruskalWallis {
  double h = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

inline KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw UsageError("kruskal_wallis needs at least 2 groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw UsageError("kruskal_wallis: every group must be non-empty");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 3) throw UsageError("kruskal_wallis needs at least 3 observations");
  std::vector<std::size_t> ties;
  const auto rank = detail::midranks(pooled, &ties);
  KruskalWallis r;
  r.df = groups.size() - 1;
  const double correction = 1.0 - detail::tie_sum(ties) / (n * n * n - n);
  if (correction <= 0.0) return r;  // all values identical
  double s = 0.0;
  std::size_t at = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += rank[at + i];
    at += g.size();
    s += rs * rs / static_cast<double>(g.size());
  }
  r.h = std::max(0.0, (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction);
  r.p = chi2_sf(r.h, static_cast<double>(r.df));
  return r;
}

inline constexpr std::size_t kExactMwuMaxProduct = 400;

struct MannWhitney {
  double u = 0.0;    // min(U_a, U_b)
  double u_a = 0.0;  // pairs where a wins, ties counting one half
  double p = 1.0;    // two-sided
  bool exact = false;
};

// U_a from the pooled midranks.
inline double mann_whitney_u_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Exact two-sided p under the permutation distribution given the observed
// tie structure. Works on 2U so every statistic is an integer.
inline double mann_whitney_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<std::size_t> groups;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    groups.push_back(j - i);
    i = j;
  }
  const std::size_t umax = 2 * na * nb;
  // dp[k][u2]: number of ways to place k of a's elements among the groups
  // seen so far with doubled statistic u2.
  std::vector<std::vector<std::uint64_t>> dp(na + 1, std::vector<std::uint64_t>(umax + 1, 0));
  dp[0][0] = 1;
  std::size_t seen = 0;
  for (std::size_t g : groups) {
    std::vector<std::vector<std::uint64_t>> next(na + 1, std::vector<std::uint64_t>(umax + 1, 0));
    const std::size_t jmax = std::min(g, na);
    std::vector<std::uint64_t> binom(jmax + 1, 1);
    for (std::size_t k = 1; k <= jmax; ++k) binom[k] = binom[k - 1] * (g - k + 1) / k;
    for (std::size_t k = 0; k <= na && k <= seen; ++k) {
      const std::size_t b_below = seen - k;
      for (std::size_t u2 = 0; u2 <= umax; ++u2) {
        if (!dp[k][u2]) continue;
        for (std::size_t j = 0; j <= jmax && k + j <= na; ++j) {
          const std::size_t add = j * (2 * b_below + (g - j));
          if (u2 + add > umax) continue;
          next[k + j][u2 + add] += dp[k][u2] * binom[j];
        }
      }
    }
    dp.swap(next);
    seen += g;
  }
  const auto obs2 = static_cast<long long>(std::llround(2.0 * mann_whitney_u_statistic(a, b)));
  const long long centre = static_cast<long long>(na * nb);
  const long long dev = std::llabs(obs2 - centre);
  std::uint64_t hit = 0, total = 0;
  for (std::size_t u2 = 0; u2 <= umax; ++u2) {
    total += dp[na][u2];
    if (std::llabs(static_cast<long long>(u2) - centre) >= dev) hit += dp[na][u2];
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

// Normal approximation with tie-corrected variance and continuity correction.
inline double mann_whitney_normal_p(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double n = na + nb;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> ties;
  detail::midranks(pooled, &ties);
  const double var = na * nb / 12.0 * ((n + 1.0) - detail::tie_sum(ties) / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;
  const double dev = std::abs(mann_whitney_u_statistic(a, b) - 0.5 * na * nb);
  const double z = std::max(0.0, dev - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * normal_sf(z));
}

inline MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw UsageError("mann_whitney_u: both samples must be non-empty");
  MannWhitney r;
  r.u_a = mann_whitney_u_statistic(a, b);
  r.u = std::min(r.u_a, static_cast<double>(a.size() * b.size()) - r.u_a);
  r.exact = a.size() * b.size() <= kExactMwuMaxProduct;
  r.p = r.exact ? mann_whitney_exact_p(a, b) : mann_whitney_normal_p(a, b);
  return r;
}

inline std::vector<double> bonferroni(const std::vector<double>& raw) {
  std::vector<double> out;
  for (double p : raw) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("bonferroni: p-values must lie in [0, 1]");
    out.push_back(std::min(1.0, p * static_cast<double>(raw.size())));
  }
  return out;
}

inline std::string significance_marker(double p) {
  if (p < 1e-4) return "****";
  if (p < 1e-3) return "***";
  if (p < 1e-2) return "**";
  if (p < 0.05) return "*";
  return "ns";
}

}  // namespace arousal
