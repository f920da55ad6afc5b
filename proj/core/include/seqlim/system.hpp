#pragma once

#include <map>
#include <memory>
#include <optional>

#include "seqlim/gibbs.hpp"
#include "seqlim/transfer.hpp"

namespace seqlim {

struct SystemOptions {
  int grid = 4096;           // interval basis size
  int burn_in = 0;           // 0 = derive from the pilot decay rate
  int gibbs_burn = 256;      // SFT power-iteration length
  double holder_alpha = 1.0; // word-basis variation exponent
  double tol = 1e-12;
  int max_cov_horizon = 200; // covariance truncation cap
  double cov_floor = 1e-15;  // adaptive truncation threshold
};

/// Computational face of one sequential system: the map sequence, the
/// discrete basis, the reference measures m_j, the pulled-back densities
/// rho_j = d m~_j / d m_j, the observable sequence and the operator cache.
///
/// Interval systems use m_j = Lebesgue (or a changed reference with density
/// weights); SFT systems use the sequential Gibbs measures, under which the
/// time-j transfer operator is the normalized one fixing constants.
class System {
 public:
  explicit System(MapSequence seq, SystemOptions opt = {});

  bool is_sft() const { return seq_.is_sft(); }
  int grid() const { return opt_.grid; }
  const MapSequence& seq() const { return seq_; }
  SystemOptions& options() { return opt_; }
  const SystemOptions& options() const { return opt_; }

  /// Initial measure density w.r.t. m_0 (interval systems; closed form so
  /// Monte Carlo rejection sampling stays exact).
  void set_initial_density(const TrigObservable& rho0);
  const std::optional<TrigObservable>& initial_density() const { return rho0_form_; }

  /// Change of reference: m'_j = w_j dm_j. Weights must be positive with
  /// unit mean; transfer operators become L'(g) = L(g w_j) / w_{j+1}.
  void set_reference_weights(std::map<int, FieldFunction> w);
  bool has_reference_change() const { return !ref_weights_.empty(); }

  // --- operators -----------------------------------------------------------
  const TransferOp& op(int j);                   // transfer op w.r.t. m_j
  /// Copy of op(j) stamped with its time index, for explicit compositions.
  TransferOp op_at(int j);
  const TransferOp& pulled(int j);               // w.r.t. pulled measures
  TransferOp twisted(int j, Complex z, bool centered = true);
  TransferOp pulled_twisted(int j, Complex z, bool centered = true);
  /// Raw weighted-adjacency operator of an SFT stage (non-normalized).
  TransferOp sft_raw(int j);

  // --- measures ------------------------------------------------------------
  const FieldFunction& rho(int j);               // d m~_j / d m_j, mean one
  double ref_mean(int j, const FieldFunction& g);
  Complex ref_mean_c(int j, const FieldFunction& g);
  double tilde_mean(int j, const FieldFunction& g);
  Complex tilde_mean_c(int j, const FieldFunction& g);
  /// Plain coefficient vector of the functional m_j (resp. m~_j).
  Eigen::VectorXd ref_weights_vec(int j);
  Eigen::VectorXd tilde_weights_vec(int j);

  // --- observables ---------------------------------------------------------
  const FieldFunction& obs(int j);
  const FieldFunction& obs_centered(int j);      // f_j - m~_j(f_j)
  double obs_center(int j);                      // m~_j(f_j)
  double obs_eval_point(int j, double x) const;  // interval closed form
  double obs_eval_symbol(int j, int a) const;

  /// Constant-one function on the time-j basis.
  FieldFunction one(int j);
  FieldFunction zero(int j);
  /// Grid sample (interval) of a closed-form function on the time-j basis.
  FieldFunction sample(int j, const std::function<double(double)>& f);

  // --- SFT layer -----------------------------------------------------------
  const GibbsSystem& gibbs_sys(int j_lo = 0, int j_hi = 0);
  WordBasisPtr word_basis(int j, int depth);

  // --- pilot quantities ----------------------------------------------------
  double pilot_rate();
  int default_burn_in();
  int cov_horizon();
  std::optional<double>& cached_twist_radius() { return twist_radius_; }

 private:
  const Stage& stage_ext(int j) const;
  void ensure_gibbs(int j_lo, int j_hi);
  TransferOp build_op(int j);
  /// Schedule period when one exists (periodic schedules), else 0.
  int schedule_period() const;
  /// Representative time index once the pulled densities have become
  /// periodic; keeps every per-time cache bounded on long horizons.
  int canonical_time(int j);

  MapSequence seq_;
  SystemOptions opt_;
  std::optional<TrigObservable> rho0_form_;
  std::map<int, FieldFunction> ref_weights_;  // reference-change densities

  std::map<int, TransferOp> ops_;
  std::map<int, TransferOp> pulled_ops_;
  std::map<int, FieldFunction> rho_;
  std::map<int, FieldFunction> obs_;
  std::map<int, FieldFunction> obs_centered_;
  std::map<int, double> obs_center_val_;
  std::map<std::pair<int, int>, WordBasisPtr> word_bases_;
  std::unique_ptr<GibbsSystem> gibbs_;
  std::optional<double> pilot_rate_;
  std::optional<double> twist_radius_;
  int rho_stationary_ = -1;  // first index of the detected periodic regime
};

// --- hypothesis verification ------------------------------------------------

/// Fit the smallest (rho, K) with variation(L_j^N h) <= rho variation(h)
/// + K |h|_1 over sampled BV functions (trig polynomials and random steps).
LyReport verify_ly(System& sys, int j, int N, int sample_count, CounterRng& rng);

/// Smallest n <= horizon such that min L_j^n h >= alpha m_j(h) uniformly over
/// sampled cone members and over j in [0, j_window).
ScReport verify_sc(System& sys, double a, int horizon, int sample_count,
                   CounterRng& rng, int j_window = 8);

/// Covering from the minorization route: delta0 = inf_n min L_0^n 1 plus the
/// decay constant on mean-zero functions give (n(a), alpha(a) = delta2/2).
MinScReport verify_min_implies_sc(System& sys, int horizon, double a = 1.0);

/// |∫(f o T_j) g dm_j - ∫ f (L_j g) dm_{j+1}| for closed-form f, exact to
/// quadrature order; used by the duality tests.
double duality_gap(System& sys, int j, const TrigObservable& f, const FieldFunction& g);

/// Weak integral ∫ f(T_j x) w(x) dx with per-cell Gauss quadrature split at
/// branch boundaries; f closed form, w a grid function.
double integrate_pullback(System& sys, int j, const TrigObservable& f,
                          const FieldFunction& w);
/// ∫ f(x) w(x) dx with the same quadrature order.
double integrate_against(const TrigObservable& f, const FieldFunction& w);

}  // namespace seqlim
