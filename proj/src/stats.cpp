#include "cgbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "cgbench/error.hpp"
#include "cgbench/rng.hpp"

namespace cgbench {

using nlohmann::json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sum of +1 per pair x > y and +0.5 per tie.
double u_statistic(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0.0;
  for (double a : x) {
    for (double b : y) {
      if (a > b) {
        u += 1.0;
      } else if (a == b) {
        u += 0.5;
      }
    }
  }
  return u;
}

}  // namespace

json test_result_to_json(const TestResult& r) {
  return json{{"statistic", r.statistic_name}, {"value", finite_or_null(r.value)},
              {"p", finite_or_null(r.p)},         {"estimate", finite_or_null(r.estimate)},
              {"n_per_group", r.n_per_group},     {"method_note", r.method_note}};
}

double mann_whitney_cdf(std::size_t n, std::size_t m, double u) {
  if (u < 0) return 0.0;
  const std::size_t max_u = n * m;
  const auto cap = static_cast<std::size_t>(std::floor(u));
  if (cap >= max_u) return 1.0;
  // count[i][j][k]: arrangements of i x's and j y's with U = k, built by
  // appending the largest element. Only the row for the current i is kept.
  std::vector<std::vector<double>> prev(m + 1, std::vector<double>(max_u + 1, 0.0));
  for (std::size_t j = 0; j <= m; ++j) prev[j][0] = 1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<std::vector<double>> cur(m + 1, std::vector<double>(max_u + 1, 0.0));
    cur[0][0] = 1.0;
    for (std::size_t j = 1; j <= m; ++j) {
      for (std::size_t k = 0; k <= i * j; ++k) {
        // Largest element is an x: it beats all j y's.
        double v = k >= j ? prev[j][k - j] : 0.0;
        // Largest element is a y: contributes nothing.
        v += cur[j - 1][k];
        cur[j][k] = v;
      }
    }
    prev = std::move(cur);
  }
  double below = 0.0, total = 0.0;
  for (std::size_t k = 0; k <= max_u; ++k) {
    total += prev[m][k];
    if (k <= cap) below += prev[m][k];
  }
  return below / total;
}

TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw BenchError(ErrorCode::EmptySample, "Mann-Whitney U needs two non-empty samples");
  const std::size_t n = x.size(), m = y.size();
  const double u1 = u_statistic(x, y);
  const double u2 = static_cast<double>(n * m) - u1;
  TestResult r;
  r.statistic_name = "U";
  r.value = std::min(u1, u2);
  r.n_per_group = {n, m};
  r.estimate = u1 / static_cast<double>(n * m);  // P(X > Y) + 0.5 P(X = Y)

  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  if (!ties && n + m <= kExactMannWhitneyLimit) {
    r.p = std::min(1.0, 2.0 * mann_whitney_cdf(n, m, r.value));
    r.method_note = "exact null distribution";
    return r;
  }
  const double nn = static_cast<double>(n + m);
  const double mu = static_cast<double>(n * m) / 2.0;
  const double var = static_cast<double>(n * m) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    r.p = 1.0;
    r.method_note = "normal approximation; all values tied";
    return r;
  }
  const double z = std::max(0.0, std::fabs(r.value - mu) - 0.5) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.method_note = ties ? "normal approximation with tie and continuity correction"
                       : "normal approximation with continuity correction";
  return r;
}

double chi_square_1df_sf(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

TestResult chi_square_2x2(const std::array<std::array<double, 2>, 2>& c) {
  const double rows[2] = {c[0][0] + c[0][1], c[1][0] + c[1][1]};
  const double cols[2] = {c[0][0] + c[1][0], c[0][1] + c[1][1]};
  const double total = rows[0] + rows[1];
  for (double v : {rows[0], rows[1], cols[0], cols[1]}) {
    if (v <= 0.0) throw BenchError(ErrorCode::ZeroMarginal, "2x2 table has an empty row or column");
  }
  double chi2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / total;
      chi2 += (c[i][j] - e) * (c[i][j] - e) / e;
    }
  }
  TestResult r;
  r.statistic_name = "chi2";
  r.value = chi2;
  r.p = chi_square_1df_sf(chi2);
  r.estimate = c[0][0] / rows[0] - c[1][0] / rows[1];
  r.n_per_group = {static_cast<std::size_t>(rows[0]), static_cast<std::size_t>(rows[1])};
  r.method_note = "Pearson chi-square, df=1, no continuity correction";
  return r;
}

TestResult cluster_permutation_test(const std::vector<double>& a_in, const std::vector<double>& b_in,
                                    std::size_t n_perm, std::uint64_t seed) {
  if (a_in.size() < 2 || b_in.size() < 2) {
    throw BenchError(ErrorCode::InsufficientData, "permutation test needs at least two participants per condition");
  }
  // Sorting makes the result independent of the order values were supplied in.
  std::vector<double> a(a_in), b(b_in);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size();
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  const auto nb = static_cast<double>(b.size());
  auto delta = [&](double sum_a) { return sum_a / static_cast<double>(na) - (total - sum_a) / nb; };

  TestResult r;
  r.statistic_name = "perm_p";
  r.n_per_group = {a.size(), b.size()};
  const double observed = mean(a) - mean(b);
  r.estimate = observed;
  r.value = observed;

  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); })) {
    r.p = 1.0;
    r.method_note = "degenerate: all participant values equal";
    return r;
  }
  const double threshold = std::fabs(observed) * (1.0 - 1e-12);
  std::size_t extreme = 0;
  std::size_t draws = 0;

  if (n_perm == 0) {
    // Every split of the pooled participants into groups of the original sizes.
    std::vector<bool> pick(pooled.size(), false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        if (pick[i]) s += pooled[i];
      }
      if (std::fabs(delta(s)) >= threshold) ++extreme;
      ++draws;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    r.method_note = "exhaustive permutation of condition labels (" + std::to_string(draws) + " splits)";
  } else {
    Rng rng(seed);
    std::vector<double> work(pooled);
    for (; draws < n_perm; ++draws) {
      for (std::size_t i = work.size() - 1; i > 0; --i) {
        std::swap(work[i], work[rng.below(i + 1)]);
      }
      const double s = std::accumulate(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
      if (std::fabs(delta(s)) >= threshold) ++extreme;
    }
    r.method_note = "Monte Carlo permutation of condition labels (" + std::to_string(n_perm) + " draws, seed " +
                    std::to_string(seed) + ")";
  }
  r.p = static_cast<double>(1 + extreme) / static_cast<double>(1 + draws);
  return r;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

TestResult trial_trend(const std::vector<std::vector<double>>& series) {
  if (series.size() < 2) throw BenchError(ErrorCode::InsufficientData, "trend test needs at least two participants");
  std::vector<double> slopes;
  for (const auto& s : series) {
    if (s.size() < 2) throw BenchError(ErrorCode::InsufficientData, "each series needs at least two trials");
    const double k = static_cast<double>(s.size());
    const double xbar = (k + 1.0) / 2.0;
    const double ybar = mean(s);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double dx = static_cast<double>(i + 1) - xbar;
      sxy += dx * (s[i] - ybar);
      sxx += dx * dx;
    }
    slopes.push_back(sxy / sxx);
  }
  const double n = static_cast<double>(slopes.size());
  const double mbar = mean(slopes);
  double ss = 0.0;
  for (double v : slopes) ss += (v - mbar) * (v - mbar);
  const double sd = std::sqrt(ss / (n - 1.0));

  TestResult r;
  r.statistic_name = "slope_t";
  r.estimate = mbar;
  r.n_per_group = {slopes.size()};
  if (sd <= 1e-12 * std::max(1.0, std::fabs(mbar))) {
    if (std::fabs(mbar) <= 1e-12) {
      r.value = 0.0;
      r.p = 1.0;
    } else {
      r.value = std::copysign(INFINITY, mbar);
      r.p = 0.0;
    }
    r.method_note = "zero variance in slopes; p set by convention";
    return r;
  }
  r.value = mbar / (sd / std::sqrt(n));
  r.p = student_t_two_sided_p(r.value, n - 1.0);
  r.method_note = "one-sample t-test of per-participant OLS slopes, df=" + std::to_string(slopes.size() - 1);
  return r;
}

}  // namespace cgbench
