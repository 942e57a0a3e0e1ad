#pragma once

#include <vector>

namespace stabsvrg::stats {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Survival function of the chi-square distribution with dof degrees of
/// freedom: P[X >= x].
double chi_square_sf(double x, int dof);

/// Chi-square goodness-of-fit statistic for observed counts against expected
/// counts (same length, expected > 0).
double chi_square_stat(const std::vector<double>& observed, const std::vector<double>& expected);

/// One-sample Kolmogorov-Smirnov statistic against U[0, 1]; values need not
/// be sorted.
double ks_statistic_uniform(std::vector<double> values);

/// Standard normal quantile (Acklam's rational approximation, |err| < 1e-9).
double normal_quantile(double p);

/// Percentile (0..100) of a sample by linear interpolation; values copied.
double percentile(std::vector<double> values, double pct);

}  // namespace stabsvrg::stats
