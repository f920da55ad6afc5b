#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "seqlim/field.hpp"
#include "seqlim/maps.hpp"
#include "seqlim/rng.hpp"

namespace seqlim {

/// Non-normalized RPF data of a sequential SFT over a time window, together
/// with the induced inhomogeneous Markov chain: marginals pi_j and row
/// stochastic transitions p_j with pi_{j+1} = pi_j p_j.
struct GibbsSystem {
  const MapSequence* seq = nullptr;
  int j0 = 0, j1 = 0;  // inclusive window of time indices carrying data

  std::vector<double> lambda;          // lambda_j, j = j0 .. j1-1
  std::vector<Eigen::VectorXd> h;      // positive, nu_j(h_j) = 1
  std::vector<Eigen::VectorXd> nu;     // probability vectors
  std::vector<Eigen::VectorXd> pi;     // marginals pi_j = h_j .* nu_j
  std::vector<Eigen::MatrixXd> trans;  // p_j(a,b), step j -> j+1
  double residual_fwd = 0.0;
  double residual_bwd = 0.0;

  int dim(int j) const;
  const SftStage& stage(int j) const;
  double lambda_at(int j) const;
  const Eigen::VectorXd& h_at(int j) const;
  const Eigen::VectorXd& nu_at(int j) const;
  const Eigen::VectorXd& pi_at(int j) const;
  const Eigen::MatrixXd& trans_at(int j) const;
  bool in_window(int j) const { return j >= j0 && j <= j1; }
};

/// Forward/backward power iteration on the weighted adjacency matrices.
/// Reducible adjacency (no positive product within the mixing horizon)
/// raises NumericError.
GibbsSystem gibbs_build(const MapSequence& seq, int j0, int j1, int burn_in = 256);

/// Exact mass of the length-r cylinder [w] at time j. Inadmissible words
/// return 0 and set *admissible to false.
double cylinder_mass(const GibbsSystem& sys, int j, std::span<const int> word,
                     bool* admissible = nullptr);

struct GibbsRatioReport {
  double c_hat = 0.0;
  std::vector<double> per_depth_max;  // indexed by depth - 2
  std::vector<double> per_depth_min;
  double max_drift = 0.0;  // variation of c_hat across depths
};
GibbsRatioReport gibbs_ratio_check(const GibbsSystem& sys, int depth_max);

/// i.i.d. sample paths of the chain started at time j_start.
std::vector<std::vector<int>> markov_sample(const GibbsSystem& sys, int j_start, int n,
                                            int count, CounterRng& rng);
/// Single path, cheap form for Monte Carlo loops.
void markov_sample_path(const GibbsSystem& sys, int j_start, int n, CounterRng& rng,
                        std::vector<int>& out);

/// Observable on two-sided words: depends on coordinates [j-past, j+future].
struct TwoSidedObservable {
  int past = 0;
  int future = 0;
  std::function<double(int j, std::span<const int> w)> eval;
};

/// One-sided table u_j or phi_j living on coordinates [j-past, ...]; the
/// table is a word FieldFunction whose basis starts at time j-past.
struct AnchoredTable {
  int past = 0;
  FieldFunction table;
  double eval(std::span<const int> w) const;  // w aligned with the basis words
};

struct SinaiResult {
  int j0 = 0, j1 = 0;
  std::vector<AnchoredTable> phi;  // one-sided, past = 0
  std::vector<AnchoredTable> u;
  double sup_u = 0.0;
  double identity_residual = 0.0;  // max over words of the reduction identity
};

/// Sequential Sinai reduction psi_j = u_j - u_{j+1} o T_j + phi_j o pi_j on
/// span-limited tables; the coboundary series truncates exactly at the past
/// span. Anchors are the lexicographically minimal admissible past
/// extensions.
SinaiResult sinai_reduce(const MapSequence& seq, const TwoSidedObservable& psi, int j0,
                         int j1);

struct LambdaEquivalence {
  bool equivalent = false;
  std::vector<double> zeta;  // zeta_j = prod(b)/prod(a) over [0, j)
  double tail_slope = 0.0;   // mean log-increment of zeta over the last half
};
LambdaEquivalence lambda_equivalence(std::span<const double> lam_a,
                                     std::span<const double> lam_b);

struct TwoSidedReport {
  double max_gap = 0.0;
  int checks = 0;
  bool pass = false;
};
/// Kolmogorov-consistency of the two-sided extension: cylinder masses at time
/// j equal the summed masses of their admissible r-step past extensions.
TwoSidedReport two_sided_extend(const GibbsSystem& sys, int max_prefix, int depth_max,
                                int samples, CounterRng& rng);

/// Admissible words of the given depth starting at time j. Weights are the
/// exact cylinder masses when a GibbsSystem is supplied, else uniform.
WordBasisPtr make_word_basis(const MapSequence& seq, int j, int depth,
                             const GibbsSystem* sys = nullptr, double holder_alpha = 1.0);

}  // namespace seqlim
