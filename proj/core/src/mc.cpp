#include "seqlim/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace seqlim {

void parallel_shards(int64_t count, int threads,
                     const std::function<void(int, int64_t, int64_t)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(threads, count)));
  // The shard decomposition is fixed so that results never depend on the
  // worker count; threads only schedule shards.
  const int shards = static_cast<int>(std::min<int64_t>(kShardCount, count));
  int64_t chunk = (count + shards - 1) / shards;
  if (threads == 1) {
    for (int s = 0; s < shards; ++s) {
      int64_t i0 = s * chunk, i1 = std::min<int64_t>(count, i0 + chunk);
      if (i0 < i1) body(s, i0, i1);
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        int s = next.fetch_add(1);
        if (s >= shards) return;
        int64_t i0 = s * chunk, i1 = std::min<int64_t>(count, i0 + chunk);
        if (i0 < i1) body(s, i0, i1);
      }
    });
  }
  for (auto& th : pool) th.join();
}

OrbitRunner::OrbitRunner(System& sys, int n_max, InitKind init) : n_max_(n_max) {
  sft_ = sys.is_sft();
  center_.resize(n_max);
  for (int j = 0; j < n_max; ++j) center_[j] = sys.obs_center(j);
  if (sft_) {
    if (init == InitKind::Density)
      throw DomainError("density initial laws apply to interval systems");
    const GibbsSystem& gs = sys.gibbs_sys(0, n_max + 1);
    pi0_ = gs.pi_at(0);
    trans_.resize(n_max);
    sym_obs_.resize(n_max);
    for (int j = 0; j < n_max; ++j) {
      trans_[j] = &gs.trans_at(j);
      const SftStage& st = as_sft(sys.seq().stage_at(j));
      std::vector<double> vals(st.d_in());
      for (int a = 0; a < st.d_in(); ++a) vals[a] = sys.obs_eval_symbol(j, a);
      sym_obs_[j] = std::move(vals);
    }
    return;
  }
  steps_.resize(n_max);
  for (int j = 0; j < n_max; ++j) {
    Step st;
    st.stage = &as_interval(sys.seq().stage_at(j));
    bool dy = true;
    for (const Branch& b : st.stage->branches) dy = dy && b.dyadic_affine();
    st.dyadic = dy;
    const Observable& o = sys.seq().observable_at(j);
    if (const auto* t = std::get_if<TrigObservable>(&o)) {
      st.v = t;
      st.coboundary = false;
    } else if (const auto* c = std::get_if<CoboundaryObservable>(&o)) {
      st.v = &c->inner;
      if (!c->extra.cos_coeff.empty() || !c->extra.sin_coeff.empty() ||
          c->extra.a0 != 0.0)
        st.extra = &c->extra;
      st.coboundary = true;
    } else {
      throw DomainError("symbol observable on an interval system");
    }
    steps_[j] = st;
  }
  if (init == InitKind::Density) {
    if (!sys.initial_density())
      throw DomainError("density initial law requested without a density");
    rejection_ = true;
    rho0_ = &*sys.initial_density();
    double sup = 0.0, mass = 0.0;
    const int K = 4096;
    for (int i = 0; i <= K; ++i) {
      double v = rho0_->eval(static_cast<double>(i) / K);
      if (v < 0) throw DomainError("initial density must be nonnegative");
      sup = std::max(sup, v);
      mass += v / (K + 1);
    }
    rho0_sup_ = sup * 1.0000001;
    if (mass / rho0_sup_ < 0.01)
      throw NumericError("rejection sampling efficiency below 1% (density too peaked)");
  }
}

double OrbitRunner::draw_initial(CounterRng& rng) const {
  if (!rejection_) return rng.uniform();
  for (int it = 0; it < 100000; ++it) {
    double x = rng.uniform();
    if (rng.uniform() * rho0_sup_ <= rho0_->eval(x)) return x;
  }
  throw NumericError("rejection sampling failed to accept");
}

int OrbitRunner::draw_symbol(const Eigen::VectorXd& p, CounterRng& rng) {
  double u = rng.uniform(), acc = 0.0;
  int d = static_cast<int>(p.size());
  for (int s = 0; s < d; ++s) {
    acc += p[s];
    if (u < acc) return s;
  }
  return d - 1;
}

int OrbitRunner::draw_symbol_row(const Eigen::MatrixXd& p, int a, CounterRng& rng) {
  double u = rng.uniform(), acc = 0.0;
  int d = static_cast<int>(p.cols());
  for (int s = 0; s < d; ++s) {
    acc += p(a, s);
    if (u < acc) return s;
  }
  return d - 1;
}

PrefixSamples collect_prefix_samples(System& sys, std::span<const int> n_list,
                                     int64_t count, uint64_t seed, InitKind init,
                                     int threads) {
  PrefixSamples out;
  out.n_list.assign(n_list.begin(), n_list.end());
  std::sort(out.n_list.begin(), out.n_list.end());
  if (out.n_list.empty()) return out;
  int n_max = out.n_list.back();
  OrbitRunner runner(sys, n_max, init);

  out.columns.assign(out.n_list.size(), std::vector<double>(count));
  parallel_shards(count, threads, [&](int, int64_t i0, int64_t i1) {
    std::vector<double> local(out.n_list.size(), 0.0);
    double s = 0.0;
    size_t ci = 0;
    runner.run_range(
        seed, i0, i1,
        [&](int j, double f) {
          s += f;
          if (ci < out.n_list.size() && j + 1 == out.n_list[ci]) {
            local[ci] = s;
            ++ci;
          }
        },
        [&](int64_t i) {
          for (size_t k = 0; k < out.n_list.size(); ++k) out.columns[k][i] = local[k];
          s = 0.0;
          ci = 0;
        });
  });
  return out;
}

PrefixMoments collect_prefix_moments(System& sys, std::span<const int> n_list,
                                     int64_t count, int p, uint64_t seed, int threads) {
  PrefixSamples samples = collect_prefix_samples(sys, n_list, count, seed,
                                                 InitKind::Reference, threads);
  PrefixMoments out;
  out.n_list = samples.n_list;
  for (const auto& col : samples.columns) {
    double sp = 0.0, s2 = 0.0;
    for (double v : col) {
      sp += std::pow(std::abs(v), p);
      s2 += v * v;
    }
    out.abs_p.push_back(sp / static_cast<double>(col.size()));
    out.m2.push_back(s2 / static_cast<double>(col.size()));
  }
  return out;
}

}  // namespace seqlim
