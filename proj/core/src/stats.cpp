#include "seqlim/stats.hpp"

#include <algorithm>
#include <cmath>

#include "seqlim/common.hpp"

namespace seqlim {

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  LineFit fit;
  size_t n = std::min(x.size(), y.size());
  fit.points = static_cast<int>(n);
  if (n < 2) return fit;
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = (syy == 0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

RateFit rate_fit(std::span<const double> sigma, std::span<const double> distance,
                 uint64_t seed) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < std::min(sigma.size(), distance.size()); ++i) {
    if (sigma[i] > 0 && distance[i] > 0) {
      lx.push_back(std::log(sigma[i]));
      ly.push_back(std::log(distance[i]));
    }
  }
  RateFit out;
  LineFit base = least_squares(lx, ly);
  out.slope = base.slope;
  out.intercept = base.intercept;
  out.r2 = base.r2;
  out.points = base.points;
  if (base.points < 3) {
    out.ci_lo = out.ci_hi = base.slope;
    return out;
  }
  size_t n = lx.size();
  std::vector<double> resid(n);
  for (size_t i = 0; i < n; ++i)
    resid[i] = ly[i] - (base.intercept + base.slope * lx[i]);
  CounterRng rng = CounterRng::substream(seed, "rate_fit_bootstrap");
  const int B = 1000;
  std::vector<double> slopes(B);
  std::vector<double> yb(n);
  for (int b = 0; b < B; ++b) {
    for (size_t i = 0; i < n; ++i) {
      yb[i] = base.intercept + base.slope * lx[i] +
              resid[rng.uniform_int(n)];
    }
    slopes[b] = least_squares(lx, yb).slope;
  }
  std::sort(slopes.begin(), slopes.end());
  out.ci_lo = slopes[static_cast<size_t>(0.025 * B)];
  out.ci_hi = slopes[static_cast<size_t>(0.975 * B) - 1];
  return out;
}

DecayFit fit_geometric(std::span<const double> values, int n0, double floor) {
  std::vector<double> xs, ys;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] > floor) {
      xs.push_back(n0 + static_cast<double>(i));
      ys.push_back(std::log(values[i]));
    }
  }
  DecayFit fit;
  LineFit lf = least_squares(xs, ys);
  fit.points = lf.points;
  if (lf.points >= 2) {
    fit.rate = std::exp(lf.slope);
    fit.prefactor = std::exp(lf.intercept);
    fit.r2 = lf.r2;
  }
  return fit;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double central_moment(std::span<const double> v, int order) {
  if (v.empty()) return 0.0;
  double m = mean_of(v);
  double s = 0;
  for (double x : v) s += std::pow(x - m, order);
  return s / static_cast<double>(v.size());
}

double skewness_of(std::span<const double> v) {
  double m2 = central_moment(v, 2);
  if (m2 <= 0) return 0.0;
  return central_moment(v, 3) / std::pow(m2, 1.5);
}

double kurtosis_of(std::span<const double> v) {
  double m2 = central_moment(v, 2);
  if (m2 <= 0) return 0.0;
  return central_moment(v, 4) / (m2 * m2);
}

double normal_cdf(double t) {
  return 0.5 * std::erfc(-t / std::sqrt(2.0));
}

double normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(kTwoPi);
}

// Acklam's rational approximation followed by one Newton correction.
double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("normal_quantile: p outside (0,1)");
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // Two Halley refinements against the analytic CDF; the second one matters
  // only in the far tails where the density is tiny.
  for (int it = 0; it < 2; ++it) {
    double e = normal_cdf(x) - p;
    double u = e / normal_pdf(x);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

}  // namespace seqlim
