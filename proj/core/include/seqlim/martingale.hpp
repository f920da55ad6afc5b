#pragma once

#include <deque>

#include "seqlim/system.hpp"

namespace seqlim {

/// Grid function with explicit composition terms, A + sum_k B_k (g_k o T_j).
/// The transfer action on this class is exact: composed factors are pulled
/// through by duality instead of being re-sampled, which matters whenever
/// branch boundaries are off the grid. Symbolic systems do not need this
/// (word tables already compose exactly).
struct TameFunction {
  int time = 0;
  FieldFunction a;                // at time j
  std::vector<FieldFunction> b;   // at time j
  std::vector<FieldFunction> g;   // at time j+1 (composed through T_j)

  bool plain() const { return b.empty(); }
  /// Exact pointwise evaluation (interval systems).
  double eval(System& sys, double x) const;
};

/// L~_j t as a plain grid function at time j+1.
FieldFunction tame_apply(System& sys, const TameFunction& t);
/// m~_j(t).
double tame_mean(System& sys, const TameFunction& t);
/// m~_j(c . t) for a plain grid function c at time j.
double tame_mean_product(System& sys, const FieldFunction& c, const TameFunction& t);
/// Pointwise square, staying inside the class.
TameFunction tame_square(System& sys, const TameFunction& t);
/// Sup of |t| over grid nodes (composition evaluated exactly).
double tame_sup(System& sys, const TameFunction& t);

/// Martingale-coboundary split f~_j = M_j + u_{j+1} o T_j - u_j over a
/// window starting at the burn-in time J (observables before J are treated
/// as zero, making u_J = 0 exact). M_j is a depth-2 word table for symbolic
/// systems and a TameFunction (with the composed -u_{j+1} term) otherwise.
struct MartingaleDecomposition {
  int j0 = 0, j1 = 0;
  std::vector<FieldFunction> u;        // u_j for j = j0 .. j1+1
  std::vector<FieldFunction> m_word;   // SFT: M_j as depth-2 tables
  std::vector<TameFunction> m_tame;    // interval: M_j with composed term
  bool word = false;
  double sup_u = 0.0;
  double sup_u_bv = 0.0;
  double max_reverse_residual = 0.0;   // max_j |L~_j M_j|_inf
  double max_reconstruction = 0.0;     // pointwise identity residual
  double tail_bound = 0.0;

  int count() const { return j1 - j0 + 1; }
  /// Var_{m0}(M_j o T_0^j), exact.
  double martingale_variance(System& sys, int j) const;
  /// Centered Q_j = M_j^2 as the representation-appropriate object.
  std::string to_csv(System& sys) const;
};

MartingaleDecomposition decompose(System& sys, int j0, int j1, double tail_tol = 1e-12);

/// Incremental exact second moments of partial sums of a centered observable
/// stream, with adaptive geometric truncation of the covariance buffer.
class VarianceAccumulator {
 public:
  VarianceAccumulator(System& sys, int start_time);
  /// Feed the centered observable at the current time; returns Var so far.
  double step(const FieldFunction& centered);
  /// Feed a centered TameFunction (interval systems).
  double step(const TameFunction& centered);
  double value() const { return var_; }
  int time() const { return t_; }

 private:
  void advance_buffer(FieldFunction&& fresh);
  System& sys_;
  int t_;
  double var_ = 0.0;
  double floor_;
  std::deque<FieldFunction> buffer_;  // pushed-forward past observables
};

/// Var(S_{j,n} f) of the configured observable, exact in the operator algebra.
double exact_variance(System& sys, int j, int n);
/// Var(S_{j,k}) for k = 1..n_max.
std::vector<double> variance_curve(System& sys, int j, int n_max);

struct DichotomyReport {
  bool bounded = false;
  std::vector<double> var_curve;        // Var(S_n)
  std::vector<double> martingale_cum;   // partial sums of Var(M_j o T_0^j)
  double sup_u = 0.0;
  double l2_gap_bound = 0.0;            // 2 sup|u|_inf
  double tail_increment = 0.0;          // max increment over the last quarter
  // The boundedness threshold is a heuristic and is reported as such.
  double threshold = 1e-6;
};
DichotomyReport variance_dichotomy(System& sys, int n_max);

struct MomentRatioPoint {
  int n = 0;
  double p_norm = 0.0;
  double l2 = 0.0;
  double ratio = 0.0;
};
/// Monte Carlo |S~_n|_p / (1 + |S~_n|_2); the L2 norm is the exact operator
/// value.
std::vector<MomentRatioPoint> moment_ratio(System& sys, std::span<const int> n_list,
                                           int p, int64_t sample_count, uint64_t seed,
                                           int threads = 0);

struct QvReport {
  double var_q = 0.0;
  double var_f = 0.0;
  double ratio = 0.0;  // Var(S Q) / (1 + Var(S f))
};
/// Quadratic-variation ratio with Q_j = M_j^2; the decomposition is started
/// at time zero so the coboundary stream is converged by time j.
QvReport quadratic_variation_ratio(System& sys, int j, int n);

}  // namespace seqlim
