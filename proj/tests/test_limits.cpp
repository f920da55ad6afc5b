#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "seqlim/gibbs.hpp"
#include "seqlim/limits.hpp"
#include "seqlim/martingale.hpp"

using namespace seqlim;

namespace {

SampleSet from_values(std::vector<double> v) {
  SampleSet s;
  s.n = 1;
  s.count = static_cast<int64_t>(v.size());
  s.sigma = 1.0;
  std::sort(v.begin(), v.end());
  s.sorted = std::move(v);
  return s;
}

SampleSet gaussian_control(int64_t n, uint64_t seed = 5) {
  CounterRng rng = CounterRng::substream(seed, "control");
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return from_values(std::move(v));
}

SampleSet shifted_gaussian(int64_t n, double c) {
  CounterRng rng = CounterRng::substream(6, "shifted");
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() + c;
  return from_values(std::move(v));
}

}  // namespace

TEST_CASE("kolmogorov distance on controls and point masses") {
  SampleSet control = gaussian_control(1000000);
  CHECK(kolmogorov(control) < control.dkw95());

  SampleSet point = from_values(std::vector<double>(1000, 0.0));
  CHECK(kolmogorov(point) == doctest::Approx(0.5).epsilon(1e-3));

  SampleSet shifted = shifted_gaussian(1000000, 0.1);
  double expected = 2 * normal_cdf(0.05) - 1;  // ~0.0399
  CHECK(kolmogorov(shifted) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("weighted distance: p = 0 reduces to kolmogorov, tails analytic") {
  SampleSet control = gaussian_control(100000);
  // at p = 0 the in-sample part equals the Kolmogorov statistic and the tail
  // part is the Gaussian tail beyond the extreme samples
  CHECK(weighted_distance(control, 0.0) == doctest::Approx(kolmogorov(control)));

  SampleSet point = from_values(std::vector<double>(1000, 0.0));
  CHECK(weighted_distance(point, 2.0) == doctest::Approx(0.5).epsilon(1e-3));

  // weighted control stays within DKW times the achieved weight plus the
  // analytic tail term
  double d3 = weighted_distance(control, 3.0);
  CHECK(d3 < 0.05);
  CHECK(d3 >= kolmogorov(control));
}

TEST_CASE("lp distances: translation identity and quadrature cross-check") {
  SampleSet shifted = shifted_gaussian(400000, 0.25);
  CHECK(lp_distance(shifted, 1.0) == doctest::Approx(0.25).epsilon(0.02));

  SampleSet point = from_values(std::vector<double>(2000, 0.0));
  // |F - Phi|^2 integrates Phi^2 + (1-Phi)^2 over the two half lines
  double direct = 0.0;
  const int cells = 4000;
  for (int i = 0; i < cells; ++i) {
    double x = -10.0 + 20.0 * (i + 0.5) / cells;
    double f = x < 0 ? 0.0 : 1.0;
    direct += std::pow(std::abs(f - normal_cdf(x)), 2.0) * (20.0 / cells);
  }
  CHECK(lp_distance(point, 2.0) == doctest::Approx(std::sqrt(direct)).epsilon(1e-3));
}

TEST_CASE("wasserstein distances: translation and dilation closed forms") {
  SampleSet shifted = shifted_gaussian(400000, 0.3);
  CHECK(wasserstein(shifted, 1.0) == doctest::Approx(0.3).epsilon(0.03));
  CHECK(wasserstein(shifted, 2.0) == doctest::Approx(0.3).epsilon(0.03));

  CounterRng rng = CounterRng::substream(7, "dilation");
  std::vector<double> v(400000);
  for (auto& x : v) x = 1.4 * rng.normal();
  SampleSet dilated = from_values(std::move(v));
  CHECK(wasserstein(dilated, 2.0) == doctest::Approx(0.4).epsilon(0.05));

  SampleSet control = gaussian_control(1000000);
  CHECK(wasserstein(control, 1.0) < 0.003);
}

TEST_CASE("distances are invariant under duplicate-pair augmentation") {
  SampleSet base = gaussian_control(20000);
  SampleSet doubled = base;
  doubled.sorted.reserve(2 * base.sorted.size());
  for (double v : base.sorted) doubled.sorted.push_back(v);
  std::sort(doubled.sorted.begin(), doubled.sorted.end());
  doubled.count = 2 * base.count;
  CHECK(kolmogorov(doubled) == doctest::Approx(kolmogorov(base)).epsilon(1e-12));
  CHECK(lp_distance(doubled, 1.0) == doctest::Approx(lp_distance(base, 1.0)).epsilon(1e-9));
  CHECK(wasserstein(doubled, 1.0) ==
        doctest::Approx(wasserstein(base, 1.0)).epsilon(1e-7));
}

TEST_CASE("weighted distance dominates the uniform one") {
  SampleSet s = shifted_gaussian(50000, 0.05);
  double base = kolmogorov(s);
  for (double p : {0.0, 1.0, 2.0, 3.0}) CHECK(weighted_distance(s, p) >= base - 1e-12);
}

TEST_CASE("gaussian expectation gaps") {
  SampleSet control = gaussian_control(500000);
  TestFunction constant;
  constant.coeff = {2.5};
  GaussGapReport c = gaussian_expectation_gap(control, constant, 2.0);
  CHECK(c.gap < 1e-12);
  CHECK(c.h_s == 0.0);

  TestFunction linear;
  linear.coeff = {0.0, 1.0};
  GaussGapReport l = gaussian_expectation_gap(control, linear, 2.0);
  CHECK(l.gap < 0.005);

  TestFunction cubic;
  cubic.coeff = {0.0, 0.0, 0.0, 1.0};
  cubic.cap = 4.0;
  GaussGapReport q = gaussian_expectation_gap(control, cubic, 4.0);
  CHECK(q.h_s > 0.0);
  CHECK(std::isfinite(q.h_s));
  CHECK(q.gap < 0.05);
}

TEST_CASE("simulation: degenerate, sign and variance sanity") {
  // f == 0 gives identically zero sums
  SystemOptions opt;
  opt.grid = 257;
  System zero_sys(MapSequence({make_doubling()}, PeriodicSchedule{{0}},
                              {TrigObservable{0.0, {0.0}, {}}}, PeriodicSchedule{{0}}),
                  opt);
  int one[1] = {8};
  PrefixSamples zero = collect_prefix_samples(zero_sys, one, 10000, 3, InitKind::Reference, 1);
  for (double v : zero.columns[0]) CHECK(v == 0.0);

  // Rademacher at n = 1: signs with frequency one half
  System iid(MapSequence({make_full_shift(2, -0.6931471805599453)},
                         PeriodicSchedule{{0}},
                         {SymbolObservable{Eigen::Vector2d(1, -1)}},
                         PeriodicSchedule{{0}}));
  SampleSet s1 = simulate(iid, 1, 100000, InitKind::Reference, 11, 1);
  int plus = 0;
  for (double v : s1.sorted) plus += v > 0 ? 1 : 0;
  CHECK(std::abs(plus / 100000.0 - 0.5) < 4 * 0.5 / std::sqrt(100000.0));

  // doubling/cos: sample variance of S_n matches n/2 within 1 percent
  SystemOptions dopt;
  dopt.grid = 4097;
  System dbl(MapSequence({make_doubling()}, PeriodicSchedule{{0}},
                         {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}}),
             dopt);
  SampleSet s = simulate(dbl, 256, 200000, InitKind::Reference, 12, 1);
  CHECK(s.sigma == doctest::Approx(std::sqrt(128.0)).epsilon(1e-9));
  double var = 0.0;
  for (double v : s.sorted) var += v * v;  // already normalized by sigma
  var /= s.count;
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("BV-density initial law via rejection sampling") {
  SystemOptions opt;
  opt.grid = 2049;
  System sys(MapSequence({make_doubling()}, PeriodicSchedule{{0}},
                         {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}}),
             opt);
  sys.set_initial_density(TrigObservable{1.0, {0.5}, {}});
  OrbitRunner runner(sys, 1, InitKind::Density);
  CounterRng rng = CounterRng::substream(9, "rejection");
  double mean = 0.0;
  const int N = 400000;
  for (int i = 0; i < N; ++i) mean += runner.draw_initial(rng);
  mean /= N;
  // E[X] under 1 + 0.5 cos(2 pi x): 1/2 + 0.5 * integral x cos = 1/2 + 0
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));

  // too-peaked density (a tall Fejer bump) fails the 1 percent efficiency bar
  System peaked(MapSequence({make_doubling()}, PeriodicSchedule{{0}},
                            {TrigObservable{0.0, {1.0}, {}}}, PeriodicSchedule{{0}}),
                opt);
  TrigObservable spike;
  spike.a0 = 1.01;
  const int K = 200;
  spike.cos_coeff.resize(K);
  for (int k = 1; k <= K; ++k)
    spike.cos_coeff[k - 1] = 2.0 * (1.0 - static_cast<double>(k) / (K + 1));
  peaked.set_initial_density(spike);
  CHECK_THROWS_AS(OrbitRunner(peaked, 1, InitKind::Density), NumericError);
}

TEST_CASE("two-sided Birkhoff gap respects the coboundary bound") {
  MapSequence seq({make_full_shift(2, -0.6931471805599453)}, PeriodicSchedule{{0}},
                  {SymbolObservable{Eigen::Vector2d(1, -1)}}, PeriodicSchedule{{0}});
  System sys(seq);
  TwoSidedObservable psi;
  psi.past = 1;
  psi.future = 0;
  psi.eval = [](int, std::span<const int> w) {
    return 0.6 * (w[1] == 0 ? 1.0 : -1.0) + 0.25 * (w[0] == w[1] ? 1.0 : 0.0);
  };
  SinaiResult sinai = sinai_reduce(seq, psi, 0, 220);
  CounterRng rng = CounterRng::substream(10, "two_sided_gap");
  TwoSidedGapReport rep = two_sided_gap(sys, psi, sinai, 200, 400, rng);
  CHECK(rep.pass);
  CHECK(rep.a_hat <= rep.bound + 1e-12);
  CHECK(rep.a_hat > 0.0);

  // already one-sided observables travel with zero gap
  TwoSidedObservable flat;
  flat.past = 0;
  flat.future = 0;
  flat.eval = [](int, std::span<const int> w) { return w[0] == 0 ? 1.0 : -1.0; };
  SinaiResult s0 = sinai_reduce(seq, flat, 0, 220);
  TwoSidedGapReport rep0 = two_sided_gap(sys, flat, s0, 200, 200, rng);
  CHECK(rep0.a_hat < 1e-12);
}

TEST_CASE("distance report row carries every column") {
  SampleSet control = gaussian_control(50000);
  control.n = 64;
  control.sigma = 4.0;
  DistanceReport d = distances(control);
  CHECK(d.n == 64);
  CHECK(d.sigma == 4.0);
  CHECK(d.kolm > 0.0);
  CHECK(d.d_p1 >= d.kolm);
  CHECK(d.d_p3 >= d.kolm);
  CHECK(d.l1 > 0.0);
  CHECK(d.l2 > 0.0);
  CHECK(d.w1 > 0.0);
  CHECK(d.w2 > 0.0);
  CHECK(d.mc_err == doctest::Approx(1.36 / std::sqrt(50000.0)));
}
