#include "seqlim/asip.hpp"

#include <cmath>
#include <sstream>

#include "seqlim/csv.hpp"

namespace seqlim {

std::string BlockPlan::to_csv() const {
  std::ostringstream ss;
  ss << "block,lo,hi,variance,partial\n";
  for (size_t k = 0; k < blocks.size(); ++k) {
    bool partial = last_partial && k + 1 == blocks.size();
    ss << k << ',' << blocks[k].first << ',' << blocks[k].second << ','
       << CsvWriter::num(variances[k]) << ',' << (partial ? 1 : 0) << '\n';
  }
  return ss.str();
}

BlockPlan plan_blocks(System& sys, int n, double B) {
  if (B <= 0) throw DomainError("plan_blocks: B > 0");
  BlockPlan plan;
  plan.target = B;
  int t = 0;
  while (t < n) {
    VarianceAccumulator acc(sys, t);
    int lo = t;
    double var = 0.0;
    while (t < n) {
      var = acc.step(sys.obs_centered(t));
      ++t;
      if (var >= B) break;
    }
    bool closed = var >= B;
    if (closed && var > 2 * B)
      throw NumericError(
          "plan_blocks: block variance overshot 2B before closing (B too small "
          "against the per-step increments)");
    plan.blocks.emplace_back(lo, t);
    plan.variances.push_back(var);
    if (!closed) {
      plan.last_partial = true;
      break;
    }
  }
  if (plan.blocks.empty()) throw DomainError("plan_blocks: empty horizon");
  if (!plan.last_partial && plan.closed_count() == 0)
    throw NumericError("plan_blocks: no closed block (variance never reaches B)");
  if (plan.closed_count() == 0)
    throw NumericError("plan_blocks: variance never reaches B (bounded-variance input)");
  return plan;
}

KnBandReport kn_band(std::span<const BlockPlan> plans, std::span<const double> sigma2) {
  KnBandReport rep;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (size_t i = 0; i < plans.size(); ++i) {
    double r = plans[i].closed_count() / sigma2[i];
    rep.ratios.push_back(r);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  rep.band = (lo > 0) ? hi / lo : std::numeric_limits<double>::infinity();
  return rep;
}

CovDecayReport block_cov_decay(System& sys, const BlockPlan& plan, int k_max) {
  CovDecayReport rep;
  int nb = plan.closed_count();
  if (nb < 2) throw DomainError("block_cov_decay: need at least two closed blocks");
  k_max = std::min(k_max, nb - 1);
  rep.cov_by_gap.assign(k_max, 0.0);
  // One pushforward stream per source block: c_t = sum_{a in I_src, a <= t}
  // L~_a^{t-a}(f~_a); Cov(A_src, A_dst) = sum_{b in I_dst} m~_b(c_b f~_b).
  for (int src = 0; src + 1 < nb; ++src) {
    auto [lo, hi] = plan.blocks[src];
    FieldFunction c = sys.is_sft()
                          ? FieldFunction::word_zero(sys.word_basis(lo, 1), lo)
                          : sys.zero(lo);
    int t = lo;
    auto advance = [&](const FieldFunction& g) {
      const TransferOp& op = sys.pulled(t);
      if (g.kind() == BasisKind::Grid) return op.apply(g);
      FieldFunction out = FieldFunction::word_zero(sys.word_basis(t + 1, 1), t + 1);
      out.values() = op.apply_vec(g.values());
      return out;
    };
    for (; t < hi;) {
      FieldFunction s = c;
      s += sys.obs_centered(t);
      c = advance(s);
      ++t;
    }
    int last_dst = std::min(nb - 1, src + k_max);
    for (int dst = src + 1; dst <= last_dst; ++dst) {
      auto [dlo, dhi] = plan.blocks[dst];
      double cov = 0.0;
      for (; t < dhi;) {
        if (t >= dlo) cov += sys.tilde_mean(t, c.pointwise(sys.obs_centered(t)));
        c = advance(c);
        ++t;
      }
      double& slot = rep.cov_by_gap[dst - src - 1];
      slot = std::max(slot, std::abs(cov));
    }
  }
  rep.fit = fit_geometric(rep.cov_by_gap, 1, 1e-15);
  return rep;
}

GouzelReport gouzel_gap(System& sys, std::span<const int> b_indices, int left_groups,
                        int gap_k, std::span<const double> t) {
  if (!sys.is_sft()) throw DomainError("gouzel_gap: symbolic systems only");
  int groups = static_cast<int>(b_indices.size()) - 1;
  if (groups < 2 || left_groups < 1 || left_groups >= groups)
    throw DomainError("gouzel_gap: need left and right groups");
  if (static_cast<int>(t.size()) != groups)
    throw DomainError("gouzel_gap: one frequency per group");
  for (int g = 0; g + 1 < groups + 1; ++g)
    if (b_indices[g + 1] <= b_indices[g])
      throw DomainError("gouzel_gap: b indices must increase");

  // E exp(i sum_{g<left} t_g S_{[b_g, b_{g+1})} + i sum_{g>=left} t_g
  //          S_{[b_g + k, b_{g+1} + k)})
  auto run = [&](bool joint_only) {
    int split = b_indices[left_groups];
    FieldFunction v = sys.one(0);
    int time = 0;
    auto advance_twisted = [&](Complex z) {
      v = sys.pulled_twisted(time, z).apply(v);
      ++time;
    };
    auto advance_plain = [&]() {
      v = sys.pulled(time).apply(v);
      ++time;
    };
    for (int g = 0; g < left_groups; ++g)
      for (int s = b_indices[g]; s < b_indices[g + 1]; ++s)
        advance_twisted(Complex(0, t[g]));
    // the k-step separation
    if (joint_only) {
      for (int s = 0; s < gap_k; ++s) advance_plain();
    } else {
      // projection insertion: Q^k g = m~_split(g) 1
      Complex m = sys.tilde_mean_c(time, v);
      time += gap_k;
      v = sys.one(time);
      v *= m;
    }
    (void)split;
    for (int g = left_groups; g < groups; ++g)
      for (int s = b_indices[g] + gap_k; s < b_indices[g + 1] + gap_k; ++s)
        advance_twisted(Complex(0, t[g]));
    return sys.tilde_mean_c(time, v);
  };

  GouzelReport rep;
  rep.joint = run(true);
  rep.factored = run(false);
  rep.gap = std::abs(rep.joint - rep.factored);
  return rep;
}

TwistedNormScan twisted_norm_scan(System& sys, std::span<const double> t_grid, int n_max,
                                  int j_count) {
  TwistedNormScan rep;
  std::vector<double> var0 = variance_curve(sys, 0, n_max);
  rep.envelope_r2 = 1.0;
  for (double t : t_grid) {
    double sup = 0.0;
    std::vector<double> fit_x, fit_y;
    for (int j = 0; j < j_count; ++j) {
      if (sys.is_sft()) {
        Eigen::MatrixXcd prod = sys.pulled_twisted(j, Complex(0, t)).to_matrix();
        for (int n = 1; n <= n_max; ++n) {
          double norm = prod.cwiseAbs().rowwise().sum().maxCoeff();
          sup = std::max(sup, norm);
          if (j == 0 && n >= 8 && t != 0.0 && norm > 1e-280) {
            fit_x.push_back(t * t * var0[n - 1]);
            fit_y.push_back(std::log(norm));
          }
          if (n < n_max)
            prod = sys.pulled_twisted(j + n, Complex(0, t)).to_matrix() * prod;
        }
      } else {
        // test-function surrogate of the sup norm
        FieldFunction v = sys.one(j);
        for (int n = 1; n <= n_max; ++n) {
          v = sys.pulled_twisted(j + n - 1, Complex(0, t)).apply(v);
          double norm = sup_norm(v);
          sup = std::max(sup, norm);
          if (j == 0 && n >= 8 && t != 0.0 && norm > 1e-280) {
            fit_x.push_back(t * t * var0[n - 1]);
            fit_y.push_back(std::log(norm));
          }
        }
      }
    }
    rep.t_grid.push_back(t);
    rep.sup_norm.push_back(sup);
    rep.max_norm = std::max(rep.max_norm, sup);
    // Gaussian envelope per frequency, transient skipped:
    // log|L^n_{it}| ~ logC - c t^2 Var(S_{0,n}) with c >= 1/4.
    if (fit_x.size() >= 4) {
      LineFit lf = least_squares(fit_x, fit_y);
      rep.envelope_r2 = std::min(rep.envelope_r2, lf.r2);
    }
  }
  return rep;
}

BlockMatchReport block_gaussian_match(System& sys, const BlockPlan& plan, int64_t orbits,
                                      uint64_t seed, int threads) {
  BlockMatchReport rep;
  rep.orbits = orbits;
  int nb = plan.closed_count();
  int n_max = plan.blocks[nb - 1].second;
  OrbitRunner runner(sys, n_max, InitKind::Reference);

  // block index per time step
  std::vector<int> block_of(n_max, -1);
  for (int b = 0; b < nb; ++b)
    for (int s = plan.blocks[b].first; s < plan.blocks[b].second; ++s) block_of[s] = b;

  struct Acc {
    std::vector<double> m1, m2, m3, m4, doob4;
    Eigen::MatrixXd cross;
    void init(int nb) {
      m1.assign(nb, 0.0);
      m2.assign(nb, 0.0);
      m3.assign(nb, 0.0);
      m4.assign(nb, 0.0);
      doob4.assign(nb, 0.0);
      cross = Eigen::MatrixXd::Zero(nb, nb);
    }
  };
  std::vector<Acc> accs(static_cast<size_t>(kShardCount));
  for (auto& a : accs) a.init(nb);

  parallel_shards(orbits, threads, [&](int shard, int64_t i0, int64_t i1) {
    Acc& acc = accs[shard];
    std::vector<double> bsum(nb, 0.0);
    std::vector<double> dmax(nb, 0.0);
    double run = 0.0, run_lo = 0.0, run_hi = 0.0;
    runner.run_range(
        seed, i0, i1,
        [&](int j, double f) {
          int b = block_of[j];
          if (b < 0) return;
          if (j == plan.blocks[b].first) run = run_lo = run_hi = 0.0;
          run += f;
          run_lo = std::min(run_lo, run);
          run_hi = std::max(run_hi, run);
          bsum[b] += f;
          if (j + 1 == plan.blocks[b].second)
            dmax[b] = std::max(run - run_lo, run_hi - run);
        },
        [&](int64_t) {
          for (int b = 0; b < nb; ++b) {
            double v = bsum[b];
            acc.m1[b] += v;
            acc.m2[b] += v * v;
            acc.m3[b] += v * v * v;
            acc.m4[b] += v * v * v * v;
            double d = dmax[b];
            acc.doob4[b] += d * d * d * d;
          }
          for (int a = 0; a < nb; ++a)
            for (int b = a + 1; b < nb; ++b) acc.cross(a, b) += bsum[a] * bsum[b];
          std::fill(bsum.begin(), bsum.end(), 0.0);
          std::fill(dmax.begin(), dmax.end(), 0.0);
          run = run_lo = run_hi = 0.0;
        });
  });

  Acc total;
  total.init(nb);
  for (const auto& a : accs) {
    for (int b = 0; b < nb; ++b) {
      total.m1[b] += a.m1[b];
      total.m2[b] += a.m2[b];
      total.m3[b] += a.m3[b];
      total.m4[b] += a.m4[b];
      total.doob4[b] += a.doob4[b];
    }
    total.cross += a.cross;
  }
  double inv = 1.0 / static_cast<double>(orbits);
  std::vector<double> mean(nb), var(nb);
  for (int b = 0; b < nb; ++b) {
    mean[b] = total.m1[b] * inv;
    var[b] = total.m2[b] * inv - mean[b] * mean[b];
    double c3 = total.m3[b] * inv - 3 * mean[b] * var[b] - std::pow(mean[b], 3);
    double m4c = total.m4[b] * inv - 4 * mean[b] * (total.m3[b] * inv) +
                 6 * mean[b] * mean[b] * (total.m2[b] * inv) - 3 * std::pow(mean[b], 4);
    rep.skewness.push_back(c3 / std::pow(var[b], 1.5));
    rep.kurtosis.push_back(m4c / (var[b] * var[b]));
    rep.doob_p4 = std::max(rep.doob_p4, std::pow(total.doob4[b] * inv, 0.25));
  }
  for (int a = 0; a < nb; ++a) {
    for (int b = a + 1; b < nb; ++b) {
      double cov = total.cross(a, b) * inv - mean[a] * mean[b];
      rep.max_abs_corr =
          std::max(rep.max_abs_corr, std::abs(cov) / std::sqrt(var[a] * var[b]));
    }
  }
  // Exact variance ledger: independent normals with the per-block variances
  // against the variance of the full sum.
  double sum_var = 0.0;
  for (int b = 0; b < nb; ++b) sum_var += plan.variances[b];
  rep.v_n = exact_variance(sys, 0, n_max);
  rep.var_sum_gap = std::abs(sum_var - rep.v_n);
  return rep;
}

}  // namespace seqlim
