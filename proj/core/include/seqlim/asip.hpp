#pragma once

#include "seqlim/martingale.hpp"
#include "seqlim/mc.hpp"
#include "seqlim/stats.hpp"
#include "seqlim/system.hpp"

namespace seqlim {

/// Variance-balanced block decomposition of [0, n): greedy left-to-right,
/// closing a block at the first index where its variance reaches B. Every
/// closed block has variance in [B, 2B]; a trailing partial block is kept
/// but flagged.
struct BlockPlan {
  double target = 0.0;  // B
  std::vector<std::pair<int, int>> blocks;  // [lo, hi) time intervals
  std::vector<double> variances;
  bool last_partial = false;
  int closed_count() const {
    return static_cast<int>(blocks.size()) - (last_partial ? 1 : 0);
  }
  std::string to_csv() const;
};
BlockPlan plan_blocks(System& sys, int n, double B);

struct KnBandReport {
  std::vector<double> ratios;  // k_n / sigma_n^2
  double band = 0.0;           // max ratio / min ratio
};
KnBandReport kn_band(std::span<const BlockPlan> plans, std::span<const double> sigma2);

struct CovDecayReport {
  std::vector<double> cov_by_gap;  // max |Cov(A_j, A_{j+k})| over j, k = 1..
  DecayFit fit;
};
/// Exact covariances of block sums, fitted geometrically in the block gap.
CovDecayReport block_cov_decay(System& sys, const BlockPlan& plan, int k_max);

struct GouzelReport {
  Complex joint;
  Complex factored;
  double gap = 0.0;
};
/// Exact characteristic-functional factorization gap across a k-step
/// separation: groups of consecutive time blocks twisted by t_j on the left,
/// shifted by k and twisted on the right. Symbolic systems only.
GouzelReport gouzel_gap(System& sys, std::span<const int> b_indices, int left_groups,
                        int gap_k, std::span<const double> t);

struct TwistedNormScan {
  std::vector<double> t_grid;
  std::vector<double> sup_norm;      // sup over (j, n <= n_max) per t
  double envelope_r2 = 0.0;          // fit of log|L^n| ~ logC - t^2 Var/4
  double max_norm = 0.0;
};
TwistedNormScan twisted_norm_scan(System& sys, std::span<const double> t_grid, int n_max,
                                  int j_count = 4);

struct BlockMatchReport {
  std::vector<double> skewness;
  std::vector<double> kurtosis;       // Gaussian -> 3
  double max_abs_corr = 0.0;          // pairwise block correlations
  double var_sum_gap = 0.0;           // |sum block variances - V_n| (exact)
  double v_n = 0.0;
  double doob_p4 = 0.0;               // max over blocks of E[D_j^4]^{1/4}
  int64_t orbits = 0;
};
/// Monte Carlo diagnostics of joint block sums on shared orbits.
BlockMatchReport block_gaussian_match(System& sys, const BlockPlan& plan, int64_t orbits,
                                      uint64_t seed, int threads = 0);

}  // namespace seqlim
