#pragma once

#include "seqlim/gibbs.hpp"
#include "seqlim/martingale.hpp"
#include "seqlim/mc.hpp"
#include "seqlim/stats.hpp"
#include "seqlim/system.hpp"

namespace seqlim {

/// Sorted normalized samples of one horizon: values of S~_n / sigma_n.
struct SampleSet {
  int n = 0;
  int64_t count = 0;
  double sigma = 0.0;
  uint64_t seed = 0;
  std::string init_desc;
  std::vector<double> sorted;

  double dkw95() const { return 1.36 / std::sqrt(static_cast<double>(count)); }
};

/// Monte Carlo sampling of S~_n / sigma_n; sigma from the exact operator
/// variance. Horizons share orbits through prefix sums.
std::vector<SampleSet> simulate_many(System& sys, std::span<const int> n_list,
                                     int64_t count, InitKind init, uint64_t seed,
                                     int threads = 0);
SampleSet simulate(System& sys, int n, int64_t count, InitKind init, uint64_t seed,
                   int threads = 0);

/// sup_t |F^_n(t) - Phi(t)| over both one-sided evaluations at the samples.
double kolmogorov(const SampleSet& s);

/// sup_t (1 + |t|^p) |F^_n(t) - Phi(t)|; outside the sample range the
/// empirical CDF is 0 or 1 and the weighted Gaussian tail is maximized in
/// closed form by a 1-d search.
double weighted_distance(const SampleSet& s, double p);

/// |F^_n - Phi|_{L^p(dx)} as a piecewise integral over order-statistic cells,
/// each cell split where Phi crosses the empirical level.
double lp_distance(const SampleSet& s, double p);

/// W_p via quantile coupling with 16-node Gauss-Legendre quadrature per
/// order-statistic cell.
double wasserstein(const SampleSet& s, double p);

/// Piecewise-polynomial test function with a cap: h(x) = poly(clamp(x)).
struct TestFunction {
  std::vector<double> coeff;  // polynomial coefficients
  double cap = 10.0;          // |x| clamp before evaluating
  double eval(double x) const;
  double deriv(double x) const;  // zero outside the cap
};

struct GaussGapReport {
  double gap = 0.0;   // |E^[h] - ∫ h dPhi|
  double h_s = 0.0;   // ∫ |h'| / (1+|x|^s) dx
};
GaussGapReport gaussian_expectation_gap(const SampleSet& s, const TestFunction& h,
                                        double s_exp);

struct DistanceReport {
  int n = 0;
  double sigma = 0.0;
  double kolm = 0.0;
  double d_p1 = 0.0, d_p3 = 0.0;
  double l1 = 0.0, l2 = 0.0;
  double w1 = 0.0, w2 = 0.0;
  double mc_err = 0.0;
};
DistanceReport distances(const SampleSet& s);

/// Moment ratios computed from already-simulated sample sets (the norms of
/// the unnormalized sums are sigma_n times the sample moments).
std::vector<MomentRatioPoint> moment_ratio_from(std::span<const SampleSet> sets, int p);

struct TwoSidedGapReport {
  double a_hat = 0.0;   // sup over paths and n of |S_n psi - S_n phi|
  double bound = 0.0;   // 2 sup |u|
  bool pass = false;
};
/// Orbit check of the reduction: the Birkhoff gap between the two-sided
/// observable and its one-sided reduction stays within the coboundary bound.
TwoSidedGapReport two_sided_gap(System& sys, const TwoSidedObservable& psi,
                                const SinaiResult& sinai, int n_max, int paths,
                                CounterRng& rng);

}  // namespace seqlim
