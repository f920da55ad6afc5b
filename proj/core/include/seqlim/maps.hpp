#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "seqlim/common.hpp"
#include "seqlim/field.hpp"

namespace seqlim {

// ---------------------------------------------------------------------------
// Branch map descriptors. Closed forms only, so derivative bounds are exact
// (affine, Moebius) or obtained by dense sampling (low-degree polynomials).

struct AffineForm {
  double a = 1.0, b = 0.0;  // x -> a x + b
};
struct MoebiusForm {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // x -> (a x + b)/(c x + d)
};
struct PolyForm {
  std::vector<double> coeff;  // sum coeff[k] x^k
};
using BranchForm = std::variant<AffineForm, MoebiusForm, PolyForm>;

struct DerivativeBounds {
  double min_abs_slope = 0.0;
  double max_abs_slope = 0.0;
  double max_second = 0.0;
  bool exact = true;  // false when obtained by sampling
};

/// Monotone C^2 branch on a half-open domain [lo, hi); the forward map is
/// injective and the image is an interval.
struct Branch {
  double lo = 0.0, hi = 1.0;
  BranchForm form;

  double eval(double x) const;
  double deriv(double x) const;
  double second(double x) const;
  /// Preimage of y under this branch (assumes y in the image).
  double invert(double y) const;

  bool increasing() const;
  double image_lo() const;  // inf of image over [lo, hi)
  double image_hi() const;  // sup of image
  bool image_contains(double y) const;
  DerivativeBounds derivative_bounds() const;
  /// Affine slope +-2^k with dyadic endpoints; such branches lose one mantissa
  /// bit per application, which the Monte Carlo stepper replenishes.
  bool dyadic_affine() const;
};

struct IntervalStage {
  std::string name;
  std::vector<Branch> branches;  // ordered by domain, disjoint, covering [0,1)
  int branch_count() const { return static_cast<int>(branches.size()); }
  const Branch& branch_at(double x) const;
};

struct SftStage {
  std::string name;
  Eigen::MatrixXd adjacency;  // d_in x d_out, 0/1 entries
  Eigen::MatrixXd potential;  // phi(a,b) on allowed pairs
  int d_in() const { return static_cast<int>(adjacency.rows()); }
  int d_out() const { return static_cast<int>(adjacency.cols()); }
  bool allowed(int a, int b) const { return adjacency(a, b) > 0.5; }
};

using Stage = std::variant<IntervalStage, SftStage>;

bool stage_is_sft(const Stage& s);
const IntervalStage& as_interval(const Stage& s);
const SftStage& as_sft(const Stage& s);

// ---------------------------------------------------------------------------
// Schedules: which family member acts at time j. Periodic and seeded
// schedules extend to negative times; explicit lists do not.

struct PeriodicSchedule {
  std::vector<int> order;  // family indices, period = order.size()
};
struct ExplicitSchedule {
  std::vector<int> indices;
};
struct SeededSchedule {
  uint64_t seed = 0;
};
using Schedule = std::variant<PeriodicSchedule, ExplicitSchedule, SeededSchedule>;

int schedule_index(const Schedule& s, int family_size, int j);
bool schedule_extendable(const Schedule& s);

// ---------------------------------------------------------------------------
// Observables. Closed forms keep Monte Carlo evaluation and high-order
// quadrature exact; symbol tables cover the SFT side.

struct TrigObservable {
  double a0 = 0.0;
  std::vector<double> cos_coeff;  // coefficient of cos(2 pi k x), k = 1..
  std::vector<double> sin_coeff;
  double eval(double x) const;
  double deriv(double x) const;
};

/// f_j = inner(T_j x) - inner(x) + extra(x); with an empty extra part this
/// is a pure coboundary sequence.
struct CoboundaryObservable {
  TrigObservable inner;
  TrigObservable extra;
};

struct SymbolObservable {
  Eigen::VectorXd values;  // one value per symbol
};

using Observable = std::variant<TrigObservable, CoboundaryObservable, SymbolObservable>;

// ---------------------------------------------------------------------------

/// A time-indexed sequence of stages plus the observable sequence.
class MapSequence {
 public:
  MapSequence() = default;
  MapSequence(std::vector<Stage> family, Schedule schedule,
              std::vector<Observable> obs_family, Schedule obs_schedule,
              int mixing_horizon = 1);

  /// Stage acting at time j >= 0. Explicit schedules throw out of range.
  const Stage& stage_at(int j) const;
  /// Extension to j < 0 for periodic/seeded schedules; throws otherwise.
  const Stage& stage_at_extended(int j) const;
  bool extendable() const { return schedule_extendable(schedule_); }
  std::optional<int> schedule_length() const;  // explicit schedules only

  const Observable& observable_at(int j) const;

  bool is_sft() const;
  int mixing_horizon() const { return mixing_horizon_; }
  const std::vector<Stage>& family() const { return family_; }
  const Schedule& schedule() const { return schedule_; }
  const Schedule& observable_schedule() const { return obs_schedule_; }
  int observable_count() const { return static_cast<int>(obs_family_.size()); }
  int family_index_at(int j) const;

  void validate() const;  // structural invariants of the family

 private:
  std::vector<Stage> family_;
  Schedule schedule_;
  std::vector<Observable> obs_family_;
  Schedule obs_schedule_;
  int mixing_horizon_ = 1;
};

// ---------------------------------------------------------------------------
// Operations on stages.

/// T_j(x) for interval stages. Branch domains are half-open, so the left
/// endpoint owns boundary points and the map is total on [0,1).
double apply_map(const IntervalStage& stage, double x);

/// Left shift on symbol words.
std::vector<int> apply_map(const SftStage& stage, std::span<const int> word);

/// All preimages of x together with |T'| there; at most one per branch.
std::vector<std::pair<double, double>> inverse_branches(const IntervalStage& stage,
                                                        double x);

struct ExpansionReport {
  double min_derivative = 0.0;
  double max_second_derivative = 0.0;
  double min_branch_length = 0.0;
  bool pass = false;
};
ExpansionReport verify_expansion(const IntervalStage& stage);

/// Region for covering checks: a subinterval of [0,1] or a set of symbols.
struct IntervalRegion {
  double lo = 0.0, hi = 1.0;
};
struct SymbolRegion {
  std::vector<int> symbols;
};
using Region = std::variant<IntervalRegion, SymbolRegion>;

struct CoveringResult {
  bool covered = false;
  int n = 0;  // smallest n with full image when covered
  // Final image when not covered: intervals or reachable symbols.
  std::vector<std::pair<double, double>> final_intervals;
  std::vector<int> final_symbols;
};
CoveringResult verify_covering(const MapSequence& seq, int j, const Region& region,
                               int horizon);

// Bundled stage and observable constructors used by configs and tests.
IntervalStage make_doubling();
IntervalStage make_tent();
IntervalStage make_w_markov();          // slopes 3 and 3/2, both branches onto
IntervalStage make_triple();            // 3x mod 1
IntervalStage make_moebius_pair();      // Moebius branch + affine branch
SftStage make_full_shift(int symbols, double log_weight);
SftStage make_golden_mean();
SftStage make_sticky_shift(int symbols, double beta);  // potential beta*[a==b]

}  // namespace seqlim
