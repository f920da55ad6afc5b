#include <doctest.h>

#include <cmath>
#include <functional>

#include "seqlim/gibbs.hpp"
#include "seqlim/stats.hpp"
#include "seqlim/system.hpp"

using namespace seqlim;

namespace {

MapSequence golden_seq() {
  return MapSequence({make_golden_mean()}, PeriodicSchedule{{0}},
                     {SymbolObservable{Eigen::Vector2d(1, -1)}}, PeriodicSchedule{{0}},
                     2);
}

MapSequence full2_seq(double logw) {
  return MapSequence({make_full_shift(2, logw)}, PeriodicSchedule{{0}},
                     {SymbolObservable{Eigen::Vector2d(1, -1)}}, PeriodicSchedule{{0}});
}

MapSequence period2_3sym() {
  SftStage a = make_full_shift(3, 0.0), b = make_full_shift(3, 0.0);
  a.potential << 0.9, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.9;
  b.potential << 0.7, 0.1, 0.0, 0.0, 0.7, 0.1, 0.1, 0.0, 0.7;
  Eigen::Vector3d vals(1.0, 0.0, -1.0);
  return MapSequence({a, b}, PeriodicSchedule{{0, 1}}, {SymbolObservable{vals}},
                     PeriodicSchedule{{0}});
}

// Independent route: ratios of finite partition sums of the raw weighted
// adjacency matrices, with two-sided buffers of length K. No eigenvector
// machinery is involved.
double partition_mass(const MapSequence& seq, int j, std::span<const int> word, int K) {
  auto weighted = [&](int t) {
    const SftStage& st = as_sft(seq.stage_at_extended(t));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(st.d_out(), st.d_in());
    for (int a = 0; a < st.d_in(); ++a)
      for (int b = 0; b < st.d_out(); ++b)
        if (st.allowed(a, b)) m(b, a) = std::exp(st.potential(a, b));
    return m;
  };
  int r = static_cast<int>(word.size());
  // left partition vector from time j-K up to time j
  Eigen::VectorXd left = Eigen::VectorXd::Ones(
      as_sft(seq.stage_at_extended(j - K)).d_in());
  for (int t = j - K; t < j; ++t) {
    left = (weighted(t) * left).eval();
    left /= left.sum();  // scale-free: ratios only
  }
  // right partition vector from time j+r-1+K backwards: row sums
  Eigen::VectorXd right = Eigen::VectorXd::Ones(
      as_sft(seq.stage_at_extended(j + r - 1 + K)).d_in());
  for (int t = j + r - 1 + K; t > j + r - 1; --t) {
    right = (weighted(t - 1).transpose() * right).eval();
    right /= right.sum();
  }
  // numerator: path through the word
  double path = 1.0;
  for (int s = 0; s + 1 < r; ++s) {
    const SftStage& st = as_sft(seq.stage_at_extended(j + s));
    if (!st.allowed(word[s], word[s + 1])) return 0.0;
    path *= std::exp(st.potential(word[s], word[s + 1]));
  }
  double numer = left[word[0]] * path * right[word[r - 1]];
  // denominator: total mass through all length-r words
  Eigen::VectorXd v = left;
  for (int s = 0; s + 1 < r; ++s) v = (weighted(j + s) * v).eval();
  double denom = v.dot(right);
  return numer / denom;
}

}  // namespace

TEST_CASE("full shift with uniform weights is the fair Bernoulli system") {
  System sys(full2_seq(-0.6931471805599453));
  const GibbsSystem& gs = sys.gibbs_sys(0, 16);
  for (int j = 0; j < 8; ++j) {
    CHECK(gs.lambda_at(j) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gs.h_at(j)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gs.h_at(j)[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gs.nu_at(j)[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
  std::vector<int> w = {0, 1, 1, 0};
  CHECK(cylinder_mass(gs, 0, w) == doctest::Approx(1.0 / 16).epsilon(1e-12));
}

TEST_CASE("golden mean shift reproduces the Perron data and Parry masses") {
  System sys(golden_seq());
  const GibbsSystem& gs = sys.gibbs_sys(0, 20);
  double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(gs.lambda_at(3) == doctest::Approx(phi).epsilon(1e-12));

  bool adm = true;
  std::vector<int> w11 = {1, 1};
  CHECK(cylinder_mass(gs, 0, w11, &adm) == 0.0);
  CHECK_FALSE(adm);

  std::vector<int> w0 = {0};
  CHECK(cylinder_mass(gs, 0, w0) ==
        doctest::Approx(phi * phi / (1 + phi * phi)).epsilon(1e-10));
  CHECK(cylinder_mass(gs, 0, w0) == doctest::Approx(0.7236).epsilon(1e-3));

  // masses of all admissible words of each depth sum to one
  for (int r : {3, 6, 9}) {
    double total = 0.0;
    std::function<void(std::vector<int>&)> rec = [&](std::vector<int>& w) {
      if (static_cast<int>(w.size()) == r) {
        total += cylinder_mass(gs, 0, w);
        return;
      }
      for (int s = 0; s < 2; ++s) {
        if (!w.empty() && w.back() == 1 && s == 1) continue;
        w.push_back(s);
        rec(w);
        w.pop_back();
      }
    };
    std::vector<int> w;
    rec(w);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("cylinder masses match the partition-sum enumeration oracle") {
  for (auto seq_fn : {golden_seq, period2_3sym}) {
    MapSequence seq = seq_fn();
    System sys(seq);
    const GibbsSystem& gs = sys.gibbs_sys(-2, 40);
    CounterRng rng = CounterRng::substream(1, "oracle");
    for (int it = 0; it < 30; ++it) {
      int r = 1 + static_cast<int>(rng.uniform_int(12));
      int j = static_cast<int>(rng.uniform_int(6));
      // random admissible word
      std::vector<int> w(r);
      const SftStage& st0 = as_sft(seq.stage_at(j));
      w[0] = static_cast<int>(rng.uniform_int(st0.d_in()));
      bool ok = true;
      for (int s = 1; s < r; ++s) {
        const SftStage& st = as_sft(seq.stage_at(j + s - 1));
        std::vector<int> nexts;
        for (int b = 0; b < st.d_out(); ++b)
          if (st.allowed(w[s - 1], b)) nexts.push_back(b);
        if (nexts.empty()) {
          ok = false;
          break;
        }
        w[s] = nexts[rng.uniform_int(nexts.size())];
      }
      if (!ok) continue;
      double ours = cylinder_mass(gs, j, w);
      double oracle = partition_mass(seq, j, w, 30);
      CHECK(std::abs(ours - oracle) <= 1e-10 * std::max(ours, oracle));
    }
  }
}

TEST_CASE("gibbs ratio constant is flat across depths") {
  {
    System sys(full2_seq(-0.6931471805599453));
    const GibbsSystem& gs = sys.gibbs_sys(0, 20);
    GibbsRatioReport rep = gibbs_ratio_check(gs, 8);
    CHECK(rep.c_hat == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rep.max_drift < 1e-10);
  }
  {
    System sys(golden_seq());
    const GibbsSystem& gs = sys.gibbs_sys(0, 24);
    GibbsRatioReport rep = gibbs_ratio_check(gs, 12);
    CHECK(rep.max_drift < 1e-10);
    CHECK(rep.c_hat > 1.0);
  }
  {
    System sys(period2_3sym());
    const GibbsSystem& gs = sys.gibbs_sys(0, 24);
    GibbsRatioReport rep = gibbs_ratio_check(gs, 8);
    CHECK(rep.max_drift < 1e-8);
  }
}

TEST_CASE("period-2 potentials give period-2 eigenvalue sequences") {
  System sys(period2_3sym());
  const GibbsSystem& gs = sys.gibbs_sys(0, 24);
  for (int j = 2; j < 12; ++j)
    CHECK(gs.lambda_at(j) == doctest::Approx(gs.lambda_at(j + 2)).epsilon(1e-12));
  CHECK(std::abs(gs.lambda_at(2) - gs.lambda_at(3)) > 1e-3);
  CHECK(gs.residual_fwd < 1e-12);
  CHECK(gs.residual_bwd < 1e-12);
}

TEST_CASE("markov sampler matches cylinder masses") {
  System sys(golden_seq());
  const GibbsSystem& gs = sys.gibbs_sys(0, 12);
  CounterRng rng = CounterRng::substream(2, "sampler");
  const int count = 200000;
  int freq0 = 0, freq11 = 0, freq010 = 0;
  std::vector<int> path;
  for (int i = 0; i < count; ++i) {
    markov_sample_path(gs, 0, 3, rng, path);
    if (path[0] == 0) ++freq0;
    if (path[0] == 1 && path[1] == 1) ++freq11;
    if (path[0] == 0 && path[1] == 1 && path[2] == 0) ++freq010;
  }
  double p0 = cylinder_mass(gs, 0, std::vector<int>{0});
  double p010 = cylinder_mass(gs, 0, std::vector<int>{0, 1, 0});
  double sd0 = std::sqrt(p0 * (1 - p0) / count);
  double sd010 = std::sqrt(p010 * (1 - p010) / count);
  CHECK(std::abs(freq0 / double(count) - p0) < 4 * sd0);
  CHECK(freq11 == 0);
  CHECK(std::abs(freq010 / double(count) - p010) < 4 * sd010);
}

TEST_CASE("normalized operators contract to the equivariant mean") {
  System sys(period2_3sym());
  CounterRng rng = CounterRng::substream(3, "rppt");
  for (int it = 0; it < 5; ++it) {
    FieldFunction g = FieldFunction::word_zero(sys.word_basis(0, 1), 0);
    for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
    double mu_g = sys.ref_mean(0, g);
    FieldFunction v = g;
    std::vector<double> norms;
    for (int n = 1; n <= 30; ++n) {
      v = sys.op(n - 1).apply(v);
      FieldFunction diff = v;
      for (int i = 0; i < diff.size(); ++i) diff[i] -= mu_g;
      norms.push_back(sup_norm(diff));
    }
    DecayFit fit = fit_geometric(norms, 1, 1e-14);
    CHECK(fit.rate < 0.9);
    CHECK(fit.r2 > 0.95);
  }
}

TEST_CASE("sinai reduction: exact identity and coboundary telescoping") {
  MapSequence seq = full2_seq(-0.6931471805599453);

  // already one-sided: u vanishes and phi equals psi
  TwoSidedObservable flat;
  flat.past = 0;
  flat.future = 0;
  flat.eval = [](int, std::span<const int> w) { return w[0] == 0 ? 1.0 : -1.0; };
  SinaiResult r0 = sinai_reduce(seq, flat, 0, 6);
  CHECK(r0.sup_u == 0.0);
  CHECK(r0.identity_residual < 1e-14);
  CHECK(r0.phi[0].eval(std::vector<int>{0, 0}) == doctest::Approx(1.0));
  CHECK(r0.phi[0].eval(std::vector<int>{0, 1}) == doctest::Approx(1.0));

  // genuine one-step past dependence
  TwoSidedObservable pair;
  pair.past = 1;
  pair.future = 0;
  pair.eval = [](int, std::span<const int> w) {
    return 0.7 * w[0] - 0.3 * w[1] + 0.2 * w[0] * w[1];
  };
  SinaiResult r1 = sinai_reduce(seq, pair, 0, 8);
  CHECK(r1.identity_residual < 1e-14);
  CHECK(r1.sup_u > 0.0);

  // coboundary input: Birkhoff sums of phi stay within the telescoping bound
  TwoSidedObservable cob;
  cob.past = 1;
  cob.future = 0;
  auto vfun = [](int s) { return s == 0 ? 0.4 : -0.1; };
  cob.eval = [&](int, std::span<const int> w) {
    // v o shift - v with v reading the current symbol
    return vfun(w[1]) - vfun(w[0]);
  };
  SinaiResult r2 = sinai_reduce(seq, cob, 0, 40);
  CHECK(r2.identity_residual < 1e-13);
  double sup_v = 0.4;
  CounterRng rng = CounterRng::substream(4, "cob_paths");
  System sys(seq);
  const GibbsSystem& gs = sys.gibbs_sys(-3, 50);
  std::vector<int> path;
  for (int it = 0; it < 200; ++it) {
    markov_sample_path(gs, -1, 45, rng, path);
    double s_phi = 0.0;
    for (int j = 0; j < 30; ++j) {
      const AnchoredTable& tab = r2.phi[j - r2.j0];
      int span = tab.table.word_basis()->depth;
      s_phi += tab.eval(std::span<const int>(path).subspan(j + 1, span));
      CHECK(std::abs(s_phi) <= 2 * (sup_v + r2.sup_u) + 1e-12);
    }
  }
}

TEST_CASE("lambda equivalence") {
  std::vector<double> lam(40, 1.3);
  LambdaEquivalence same = lambda_equivalence(lam, lam);
  CHECK(same.equivalent);
  for (double z : same.zeta) CHECK(z == doctest::Approx(1.0));

  std::vector<double> doubled(40);
  for (auto& v : doubled) v = 2.6;
  LambdaEquivalence off = lambda_equivalence(lam, doubled);
  CHECK_FALSE(off.equivalent);
  CHECK(off.zeta.back() > 1e10);

  std::vector<double> bumped = lam;
  bumped[3] = 2.0;
  LambdaEquivalence bump = lambda_equivalence(lam, bumped);
  CHECK(bump.equivalent);
  CHECK(bump.zeta.back() == doctest::Approx(2.0 / 1.3).epsilon(1e-12));
}

TEST_CASE("two-sided extension is Kolmogorov consistent") {
  CounterRng rng = CounterRng::substream(5, "two_sided");
  {
    System sys(full2_seq(-0.6931471805599453));
    const GibbsSystem& gs = sys.gibbs_sys(-10, 20);
    TwoSidedReport rep = two_sided_extend(gs, 4, 6, 100, rng);
    CHECK(rep.pass);
    CHECK(rep.max_gap < 1e-12);
  }
  {
    System sys(golden_seq());
    const GibbsSystem& gs = sys.gibbs_sys(-10, 20);
    TwoSidedReport rep = two_sided_extend(gs, 4, 8, 100, rng);
    CHECK(rep.pass);
  }
  {
    System sys(period2_3sym());
    const GibbsSystem& gs = sys.gibbs_sys(-10, 20);
    TwoSidedReport rep = two_sided_extend(gs, 4, 8, 100, rng);
    CHECK(rep.pass);
  }
}

TEST_CASE("reducible adjacency fails the mixing precheck") {
  SftStage reducible;
  reducible.adjacency = Eigen::MatrixXd::Identity(2, 2);
  reducible.potential = Eigen::MatrixXd::Zero(2, 2);
  MapSequence seq({reducible}, PeriodicSchedule{{0}},
                  {SymbolObservable{Eigen::Vector2d(1, -1)}}, PeriodicSchedule{{0}}, 3);
  CHECK_THROWS_AS(gibbs_build(seq, 0, 8), NumericError);
}
