#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "seqlim/system.hpp"

namespace seqlim {

enum class InitKind {
  Reference,  // m_0: uniform for interval systems, the Gibbs chain for SFTs
  Density     // BV density w.r.t. m_0 via rejection sampling (interval only)
};

/// Fixed shard count of every Monte Carlo decomposition; results are
/// byte-identical for any worker count.
inline constexpr int kShardCount = 64;

/// Run shard bodies [0,T) with a fixed shard decomposition of [0,count);
/// results must only depend on the orbit index, never on the thread layout.
void parallel_shards(int64_t count, int threads,
                     const std::function<void(int shard, int64_t i0, int64_t i1)>& body);

/// Pre-resolved per-step data for fast orbit stepping. Instances are
/// read-only after construction and safe to share across worker threads.
class OrbitRunner {
 public:
  OrbitRunner(System& sys, int n_max, InitKind init);

  int n_max() const { return n_max_; }

  /// Simulate orbits [i0, i1). For every orbit: per_step(j, f_centered_j)
  /// for j = 0..n_max-1, then per_orbit(i).
  template <class StepFn, class OrbitFn>
  void run_range(uint64_t seed, int64_t i0, int64_t i1, StepFn&& per_step,
                 OrbitFn&& per_orbit) const {
    for (int64_t i = i0; i < i1; ++i) {
      CounterRng rng = CounterRng::substream(seed, "orbit", static_cast<uint64_t>(i));
      if (sft_) {
        int a = draw_symbol(pi0_, rng);
        for (int j = 0; j < n_max_; ++j) {
          per_step(j, sym_obs_[j][a] - center_[j]);
          a = draw_symbol_row(*trans_[j], a, rng);
        }
      } else {
        double x = draw_initial(rng);
        for (int j = 0; j < n_max_; ++j) {
          const Step& st = steps_[j];
          double y = apply_map(*st.stage, x);
          if (st.dyadic) {
            // Slope +-2^k branches shift mantissa bits out; replenish the
            // bottom bit so long orbits keep their randomness.
            y += static_cast<double>(rng.bit()) * 0x1.0p-53;
            if (y >= 1.0) y = 1.0 - 0x1.0p-53;
          }
          double f = st.coboundary ? st.v->eval(y) - st.v->eval(x) : st.v->eval(x);
          if (st.extra) f += st.extra->eval(x);
          per_step(j, f - center_[j]);
          x = y;
        }
      }
      per_orbit(i);
    }
  }

  double draw_initial(CounterRng& rng) const;

 private:
  static int draw_symbol(const Eigen::VectorXd& p, CounterRng& rng);
  static int draw_symbol_row(const Eigen::MatrixXd& p, int a, CounterRng& rng);

  bool sft_ = false;
  int n_max_ = 0;
  std::vector<double> center_;

  struct Step {
    const IntervalStage* stage = nullptr;
    const TrigObservable* v = nullptr;
    const TrigObservable* extra = nullptr;
    bool coboundary = false;
    bool dyadic = false;
  };
  std::vector<Step> steps_;
  bool rejection_ = false;
  const TrigObservable* rho0_ = nullptr;
  double rho0_sup_ = 1.0;

  Eigen::VectorXd pi0_;
  std::vector<const Eigen::MatrixXd*> trans_;
  std::vector<std::vector<double>> sym_obs_;
};

/// Centered partial sums S~_{n} at the requested horizons, one column per n.
struct PrefixSamples {
  std::vector<int> n_list;
  std::vector<std::vector<double>> columns;
};
PrefixSamples collect_prefix_samples(System& sys, std::span<const int> n_list,
                                     int64_t count, uint64_t seed, InitKind init,
                                     int threads = 0);

struct PrefixMoments {
  std::vector<int> n_list;
  std::vector<double> abs_p;  // E |S~_n|^p
  std::vector<double> m2;     // E S~_n^2
};
PrefixMoments collect_prefix_moments(System& sys, std::span<const int> n_list,
                                     int64_t count, int p, uint64_t seed,
                                     int threads = 0);

}  // namespace seqlim
