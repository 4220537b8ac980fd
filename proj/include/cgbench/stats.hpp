#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cgbench {

struct TestResult {
  std::string statistic_name;  // "U", "chi2", "slope_t", "perm_p"
  double value = 0.0;          // NaN when undefined (written as null)
  double p = 1.0;
  double estimate = 0.0;  // effect estimate: mean difference, mean slope, ...
  std::vector<std::size_t> n_per_group;
  std::string method_note;

  bool significant(double alpha = 0.05) const { return p < alpha; }
};

nlohmann::json test_result_to_json(const TestResult& r);

/// Two-sided Mann-Whitney U with U = min(U1, U2). Exact null distribution
/// when |x| + |y| <= 12 and there are no ties; otherwise the normal
/// approximation with tie and continuity correction. Throws EmptySample.
TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y);

/// P(U1 <= u) under the null for group sizes n, m (no ties).
double mann_whitney_cdf(std::size_t n, std::size_t m, double u);

inline constexpr std::size_t kExactMannWhitneyLimit = 12;

/// Pearson chi-square without continuity correction, df = 1. counts[row][col].
/// Throws ZeroMarginal when a row or column sums to zero.
TestResult chi_square_2x2(const std::array<std::array<double, 2>, 2>& counts);

/// Difference of means between two groups of per-participant values, with
/// condition labels permuted across participants. n_perm == 0 enumerates
/// every split. p = (1 + #{|d_perm| >= |d_obs|}) / (1 + n_perm).
/// Throws InsufficientData with fewer than two participants in a group.
TestResult cluster_permutation_test(const std::vector<double>& a, const std::vector<double>& b, std::size_t n_perm,
                                    std::uint64_t seed);

/// Least-squares slope of each participant's series against trial position,
/// then a one-sample t-test of the slopes against zero.
/// Throws InsufficientData with fewer than two series or a series shorter than 2.
TestResult trial_trend(const std::vector<std::vector<double>>& series);

/// Two-sided p of a Student t statistic.
double student_t_two_sided_p(double t, double df);
double chi_square_1df_sf(double x);

}  // namespace cgbench
