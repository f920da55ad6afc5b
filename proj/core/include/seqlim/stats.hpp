#pragma once

#include <span>
#include <vector>

#include "seqlim/rng.hpp"

namespace seqlim {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Ordinary least squares y = slope*x + intercept.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;   // 95% bootstrap interval for the slope
  double ci_hi = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Power-law fit distance ~ C * sigma^slope via least squares on logs.
/// Nonpositive distances are excluded. ci95 from a residual bootstrap
/// (1000 resamples, seeded deterministically).
RateFit rate_fit(std::span<const double> sigma, std::span<const double> distance,
                 uint64_t seed = 0x5eed);

/// Geometric-decay fit of a positive sequence a_n ~ C * rate^n, n = n0,...
/// Entries at or below `floor` are excluded.
struct DecayFit {
  double rate = 0.0;
  double prefactor = 0.0;
  double r2 = 0.0;
  int points = 0;
};
DecayFit fit_geometric(std::span<const double> values, int n0 = 0, double floor = 1e-14);

double mean_of(std::span<const double> v);
double variance_of(std::span<const double> v);  // population variance
/// Central sample moment of given order.
double central_moment(std::span<const double> v, int order);
double skewness_of(std::span<const double> v);
double kurtosis_of(std::span<const double> v);  // plain kurtosis (Gaussian -> 3)

/// Standard normal CDF, accurate to ~1e-15 absolute for |t| <= 8.
double normal_cdf(double t);
/// Standard normal density.
double normal_pdf(double t);
/// Inverse of normal_cdf; rational initial guess refined with one Newton
/// step, absolute error below 1e-12 on (1e-300, 1-1e-16).
double normal_quantile(double p);

}  // namespace seqlim
