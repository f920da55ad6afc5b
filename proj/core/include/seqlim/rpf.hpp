#pragma once

#include "seqlim/stats.hpp"
#include "seqlim/system.hpp"

namespace seqlim {

/// Equivariant triplet data over a time window: L_j h_j = lambda_j h_{j+1}
/// with m_j(h_j) = 1. For probability-preserving references lambda_j = 1 and
/// the duals are the reference functionals themselves.
struct RpfTriplet {
  int j0 = 0, j1 = 0;
  std::vector<Complex> lambdas;           // per step, j0..j1-1
  std::vector<FieldFunction> densities;   // per time, j0..j1
  int burn_in = 0;
  double residual = 0.0;                  // max_j BV norm of L_j h_j - lambda_j h_{j+1}
  double min_density = 0.0;

  const FieldFunction& h_at(int j) const;
  std::string to_csv() const;  // j, lambda, min h, max h
};

/// Densities by burn-in from the constant function: h_j is the normalized
/// K-step image of 1 started at time j-K (clamped at 0 for schedules that do
/// not extend, which is the rank-one extension device).
RpfTriplet forward_density(System& sys, int j0, int j1, int burn_in = 0);

/// Norms |L_0^n g - m_0(g) h_n|_BV for n = 1..n_max.
std::vector<double> decay_profile(System& sys, const RpfTriplet& trip,
                                  const FieldFunction& g, int n_max);
/// Least-squares geometric fit of a decay profile, skipping a transient and
/// ignoring entries at or below `floor` (the discretization floor).
DecayFit fit_decay(std::span<const double> norms, int transient = 5,
                   double floor = 1e-13);

/// |L_0^n g0 - h_n|_BV for a probability density g0 (uniqueness route).
std::vector<double> uniqueness_gap(System& sys, const RpfTriplet& trip,
                                   const FieldFunction& g0, int n_max);

/// Derived system whose reference measures are mu_j = h_j dm_j; its transfer
/// operators fix constants and all hypothesis checks can be re-run on it.
System change_reference(System& sys, const RpfTriplet& trip);

struct ContractionReport {
  double r_hat = 0.0;              // projective diameter of the M-step image
  double per_m_contraction = 0.0;  // worst d(L^M f, L^M g)/d(f,g) over pairs
  double birkhoff_bound = 0.0;     // tanh(diameter/4); 1 when the diameter
                                   // is infinite (kernel not yet filled in)
  bool diameter_finite = false;
  bool pass = false;
  int pairs_used = 0;
};

/// Positive-cone contraction diagnostic. The image diameter is computed
/// exactly from the columns of the M-step kernel (extreme rays of the
/// positive cone); sampled pairs must contract at least as fast as the
/// Birkhoff bound tanh(diameter/4).
ContractionReport contraction_diagnostic(System& sys, double a, int M, int sample_pairs,
                                         CounterRng& rng, int grid_override = 256);

/// Weak-equivariance residual max over test functions of
/// |mu_j(phi o T_j) - mu_{j+1}(phi)| with closed-form trig test functions.
double equivariance_residual(System& sys, const RpfTriplet& trip, int j_count,
                             int test_count, CounterRng& rng);

}  // namespace seqlim
