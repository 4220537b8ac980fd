#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cgbench/rng.hpp"

namespace cgbench::testing {

// Two-sided exact p by listing every way to pick which ranks belong to x.
inline double brute_force_mwu_p(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t N = n + y.size();
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  auto rank_sum_u = [&](const std::vector<double>& group) {
    double r = 0;
    for (double v : group) r += static_cast<double>(std::find(pooled.begin(), pooled.end(), v) - pooled.begin() + 1);
    return r - static_cast<double>(n * (n + 1)) / 2.0;
  };
  const double mu = static_cast<double>(n * y.size()) / 2.0;
  const double observed = std::fabs(rank_sum_u(x) - mu);
  std::size_t extreme = 0;
  std::size_t total = 0;
  for (std::uint32_t mask = 0; mask < (1u << N); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
    double r = 0;
    for (std::size_t i = 0; i < N; ++i) {
      if (mask & (1u << i)) r += static_cast<double>(i + 1);
    }
    const double u = r - static_cast<double>(n * (n + 1)) / 2.0;
    ++total;
    if (std::fabs(u - mu) >= observed - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

/// n values on a 0.1 grid, none of them in used; appends to used.
inline std::vector<double> distinct_sample(Rng& rng, std::size_t n, std::vector<double>& used) {
  std::vector<double> out;
  while (out.size() < n) {
    const double v = std::floor(rng.uniform01() * 1000.0) / 10.0;
    if (std::find(used.begin(), used.end(), v) != used.end()) continue;
    used.push_back(v);
    out.push_back(v);
  }
  return out;
}

}  // namespace cgbench::testing
