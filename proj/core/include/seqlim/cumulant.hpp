#pragma once

#include "seqlim/stats.hpp"
#include "seqlim/system.hpp"

namespace seqlim {

/// Perturbed eigen-data of the twisted operators L_{j,z} h = L_j(h e^{z f_j})
/// over a window; at z = 0 it reduces to the untwisted triplet.
struct TwistedTriplet {
  Complex z;
  int j0 = 0, j1 = 0;
  std::vector<Complex> lambda;          // per step, j0..j1-1
  std::vector<FieldFunction> h;         // per time, scaled so nu_j^(z)(h_j^(z)) = 1
  std::vector<Eigen::VectorXcd> nu;     // dual coefficient vectors
  double residual = 0.0;                // max BV eigen-equation residual
  double min_abs_lambda = 0.0;

  Complex lambda_at(int j) const;
  const FieldFunction& h_at(int j) const;
  const Eigen::VectorXcd& nu_at(int j) const;
};

/// Forward/backward burn-in construction. Throws NumericError (out of
/// radius) when the residual exceeds `tol` or an eigenvalue degenerates.
TwistedTriplet twisted_triplet(System& sys, Complex z, int j0, int j1, int burn_in = 0,
                               double tol = 1e-8);

/// Largest |z| on a log grid (both real and imaginary rays) where the
/// twisted construction stays within tolerance; cached on the system.
double twist_radius(System& sys);

/// Branch-tracked per-step eigenvalue logs over a window: log lambda_k(z)
/// with the continuous branch vanishing at z = 0, followed along a straight
/// path from 0 to z.
struct PiTable {
  Complex z;
  int j0 = 0, j1 = 0;
  std::vector<Complex> log_lambda;  // per step, j0..j1-1
  /// Window sum Pi_{j,n}(z); additive under window concatenation.
  Complex window(int j, int n) const;
};
PiTable build_pi_table(System& sys, Complex z, int j0, int j1, int path_steps = 64);

/// One-off Pi_{j,n}(z); builds a table over [j, j+n].
Complex pi_window(System& sys, int j, int n, Complex z, int path_steps = 64);

/// Window log-MGF log E_{m_0} exp(z (S_{j+n} - S_j)) via pulled twisted
/// operator products; exact for symbolic systems.
Complex window_cgf(System& sys, int j, int n, Complex z);

struct LllReport {
  double max_gap = 0.0;
  std::vector<int> n_grid;
  std::vector<double> gap_by_n;  // max over j at each n
  double slope_vs_n = 0.0;       // trend of the gap in n
};
LllReport lll_gap(System& sys, Complex z, int j_max, int n_max, int j_step = 8,
                  int n_step = 25);

enum class DerivScheme { Central, Cauchy };

/// k-th derivative of an analytic map; Cauchy-circle quadrature by default
/// for orders >= 3, central finite differences as the cross-check.
Complex derivative(const std::function<Complex(Complex)>& fn, Complex z0, int k,
                   DerivScheme scheme = DerivScheme::Cauchy, double step = 1e-2,
                   int nodes = 64);

struct GrowthPoint {
  int n = 0;
  double sigma = 0.0;
  double value = 0.0;  // sigma^(k-2) * sup_t |Lambda_n^(k)(t)|
};
struct GrowthReport {
  std::vector<GrowthPoint> points;
  double plateau_slope = 0.0;  // log value vs log sigma
};
/// Normalized-CGF derivative scan: Lambda_n(t) = log E exp(i t S_n / sigma_n)
/// on 33 points of [-delta sigma_n, delta sigma_n] (refined x4 at the worst
/// cell), k-th derivatives by Cauchy circles.
GrowthReport growth_check(System& sys, std::span<const int> n_list, int k, double delta);

/// Norm profile of A_j^{z,n} - lambda_{j,n}(z) nu_j^(z)(.) h_{j+n}^(z) on
/// test functions, with a geometric fit.
struct TwistedDecay {
  std::vector<double> norms;
  DecayFit fit;
};
TwistedDecay twisted_decay(System& sys, Complex z, int n_max, int j0 = 0);

struct ThirdDerivReport {
  double max_ratio = 0.0;  // |Pi'''_{j,n}(it)| / (1 + Var(S_{j,n}))
  std::vector<double> ratios;
};
ThirdDerivReport third_derivative_window(System& sys,
                                         std::span<const std::pair<int, int>> windows,
                                         double t_max, int t_count = 5);

}  // namespace seqlim
