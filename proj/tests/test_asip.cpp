#include <doctest.h>

#include <cmath>

#include "seqlim/asip.hpp"

using namespace seqlim;

namespace {

System rademacher() {
  return System(MapSequence({make_full_shift(2, -0.6931471805599453)},
                            PeriodicSchedule{{0}},
                            {SymbolObservable{Eigen::Vector2d(1, -1)}},
                            PeriodicSchedule{{0}}));
}

System sticky2(double beta_a = 2.94, double beta_b = 2.70) {
  return System(MapSequence({make_sticky_shift(2, beta_a), make_sticky_shift(2, beta_b)},
                            PeriodicSchedule{{0, 1}},
                            {SymbolObservable{Eigen::Vector2d(1, -1)}},
                            PeriodicSchedule{{0}}));
}

System doubling_cos(int grid = 4097) {
  SystemOptions opt;
  opt.grid = grid;
  return System(MapSequence({make_doubling()}, PeriodicSchedule{{0}},
                            {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}}),
                opt);
}

System sticky3() {
  return System(MapSequence({make_sticky_shift(3, 0.9)}, PeriodicSchedule{{0}},
                            {SymbolObservable{Eigen::Vector3d(1, 0, -1)}},
                            PeriodicSchedule{{0}}));
}

}  // namespace

TEST_CASE("block plans tile the horizon with variances in [B, 2B]") {
  // constant per-step variance 1: blocks of exactly B steps
  System iid = rademacher();
  BlockPlan plan = plan_blocks(iid, 100, 10.0);
  CHECK(plan.closed_count() == 10);
  CHECK_FALSE(plan.last_partial);
  int edge = 0;
  for (int b = 0; b < plan.closed_count(); ++b) {
    CHECK(plan.blocks[b].first == edge);
    edge = plan.blocks[b].second;
    CHECK(plan.blocks[b].second - plan.blocks[b].first == 10);
    CHECK(plan.variances[b] == doctest::Approx(10.0).epsilon(1e-9));
  }
  CHECK(edge == 100);

  // doubling/cos at B = 25: length-50 blocks, variance exactly at B
  System dbl = doubling_cos();
  BlockPlan dplan = plan_blocks(dbl, 500, 25.0);
  for (int b = 0; b < dplan.closed_count(); ++b) {
    CHECK(dplan.blocks[b].second - dplan.blocks[b].first == 50);
    CHECK(dplan.variances[b] >= 25.0 - 1e-9);
    CHECK(dplan.variances[b] <= 50.0 + 1e-9);
  }

  // positively correlated chain still lands inside [B, 2B]
  System st = sticky2();
  BlockPlan splan = plan_blocks(st, 400, 25.0);
  CHECK(splan.closed_count() >= 3);
  for (int b = 0; b < splan.closed_count(); ++b) {
    CHECK(splan.variances[b] >= 25.0 - 1e-9);
    CHECK(splan.variances[b] <= 50.0 + 1e-9);
  }
}

TEST_CASE("bounded-variance input cannot reach the block target") {
  SystemOptions opt;
  opt.grid = 1025;
  CoboundaryObservable cob;
  cob.inner = TrigObservable{0.0, {0.2}, {}};
  System sys(MapSequence({make_doubling()}, PeriodicSchedule{{0}}, {cob},
                         PeriodicSchedule{{0}}),
             opt);
  CHECK_THROWS_AS(plan_blocks(sys, 2000, 25.0), NumericError);
}

TEST_CASE("k_n tracks sigma_n^2 within a narrow band") {
  System dbl = doubling_cos();
  std::vector<BlockPlan> plans;
  std::vector<double> sigma2;
  for (int n : {400, 800, 1600, 3200}) {
    plans.push_back(plan_blocks(dbl, n, 25.0));
    sigma2.push_back(exact_variance(dbl, 0, n));
  }
  KnBandReport band = kn_band(plans, sigma2);
  for (double r : band.ratios) CHECK(r == doctest::Approx(1.0 / 50.0).epsilon(0.05));
  CHECK(band.band < 1.2);
}

TEST_CASE("block covariances: vanishing for independence, geometric for sticky chains") {
  System iid = rademacher();
  BlockPlan iplan = plan_blocks(iid, 200, 10.0);
  CovDecayReport icov = block_cov_decay(iid, iplan, 8);
  for (double c : icov.cov_by_gap) CHECK(std::abs(c) < 1e-12);

  System st = sticky2();
  BlockPlan splan = plan_blocks(st, 2000, 25.0);
  CovDecayReport cov = block_cov_decay(st, splan, 16);
  CHECK(cov.fit.points >= 8);
  CHECK(cov.fit.rate < 1.0);
  CHECK(cov.fit.rate > 0.1);
  CHECK(cov.fit.r2 > 0.95);
  CHECK(cov.cov_by_gap[0] > cov.cov_by_gap[4]);
}

TEST_CASE("factorization gap: exact zero at t = 0, geometric in the separation") {
  System st = sticky3();
  std::vector<int> bidx = {0, 3, 6};
  std::vector<double> zeros = {0.0, 0.0};
  GouzelReport z = gouzel_gap(st, bidx, 1, 5, zeros);
  CHECK(z.gap < 1e-14);
  CHECK(std::abs(z.joint - Complex(1.0)) < 1e-12);

  std::vector<double> ts = {0.05, -0.04};
  std::vector<double> gaps;
  for (int k = 1; k <= 30; ++k) gaps.push_back(gouzel_gap(st, bidx, 1, k, ts).gap);
  DecayFit fit = fit_geometric(gaps, 1, 1e-14);
  CHECK(fit.points >= 10);
  CHECK(fit.rate < 0.6);
  CHECK(fit.r2 > 0.95);
  CHECK(gaps[29] < 1e-12);

  // the projection insertion reproduces the product of the two marginals
  System st2 = sticky2();
  GouzelReport rep = gouzel_gap(st2, bidx, 1, 4, ts);
  // direct marginals
  auto marginal = [&](int lo, int hi, double t, int shift) {
    FieldFunction v = st2.one(lo + shift);
    for (int s = lo + shift; s < hi + shift; ++s)
      v = st2.pulled_twisted(s, Complex(0, t)).apply(v);
    return st2.tilde_mean_c(hi + shift, v);
  };
  Complex left = marginal(0, 3, 0.05, 0);
  Complex right = marginal(3, 6, -0.04, 4);
  CHECK(std::abs(rep.factored - left * right) < 1e-12);
}

TEST_CASE("twisted norm scan: closed form for independent signs") {
  System iid = rademacher();
  std::vector<double> tg = {0.1, 0.3};
  TwistedNormScan scan = twisted_norm_scan(iid, tg, 64, 2);
  // |L^n_{it}| = |cos t|^(n-1) in the sup norm; the sup over n is at n = 1
  CHECK(scan.sup_norm[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scan.max_norm <= 1.0 + 1e-12);
  CHECK(scan.envelope_r2 > 0.99);

  System st = sticky2();
  TwistedNormScan s2 = twisted_norm_scan(st, tg, 128, 2);
  CHECK(s2.max_norm < 100.0);
  CHECK(s2.envelope_r2 > 0.9);
}

TEST_CASE("block gaussian matching on shared orbits") {
  System dbl = doubling_cos(1025);
  BlockPlan plan = plan_blocks(dbl, 400, 25.0);
  BlockMatchReport rep = block_gaussian_match(dbl, plan, 200000, 77, 1);
  for (double k : rep.kurtosis) CHECK(std::abs(k - 3.0) < 0.2);
  // block sums of this system carry a genuine n^(-1/2) skew; it is reported,
  // not constrained
  for (double sgn : rep.skewness) CHECK(std::abs(sgn) < 0.5);
  CHECK(rep.max_abs_corr < 0.05);
  CHECK(rep.doob_p4 > 0.0);
  CHECK(rep.doob_p4 < 20.0);
  // exact variance ledger: block variances against the full sum
  CHECK(rep.var_sum_gap < 1e-6);
  CHECK(rep.v_n == doctest::Approx(200.0).epsilon(1e-8));
}

TEST_CASE("variance ledger gap stays bounded as the horizon grows") {
  // On a system with vanishing inter-block covariances the ledger gap sits
  // at the numerical floor, so its growth exponent is far below 1/2 + eps.
  System dbl = doubling_cos(1025);
  std::vector<double> gaps, vns;
  for (int n : {250, 500, 1000, 2000}) {
    BlockPlan plan = plan_blocks(dbl, n, 25.0);
    double sum = 0.0;
    for (int b = 0; b < plan.closed_count(); ++b) sum += plan.variances[b];
    int covered = plan.blocks[plan.closed_count() - 1].second;
    double vn = exact_variance(dbl, 0, covered);
    gaps.push_back(std::max(std::abs(sum - vn), 1e-12));
    vns.push_back(vn);
  }
  RateFit fit = rate_fit(vns, gaps);
  CHECK(fit.slope < 0.65);
}
