#include "seqlim/limits.hpp"

#include <algorithm>
#include <cmath>

#include "seqlim/martingale.hpp"

namespace seqlim {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
const double kGlx[16] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
    -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
    -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
    0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
    0.9894009349916499};
const double kGlw[16] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
    0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
    0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
    0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
    0.0271524594117541};

double gl16(const std::function<double(double)>& f, double a, double b) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 16; ++i) s += kGlw[i] * f(mid + half * kGlx[i]);
  return s * half;
}

}  // namespace

std::vector<SampleSet> simulate_many(System& sys, std::span<const int> n_list,
                                     int64_t count, InitKind init, uint64_t seed,
                                     int threads) {
  if (count < 10000) throw DomainError("simulate: at least 1e4 samples required");
  PrefixSamples samples = collect_prefix_samples(sys, n_list, count, seed, init, threads);
  std::vector<double> var_curve;
  if (!samples.n_list.empty())
    var_curve = variance_curve(sys, 0, samples.n_list.back());
  std::vector<SampleSet> out;
  for (size_t k = 0; k < samples.n_list.size(); ++k) {
    SampleSet s;
    s.n = samples.n_list[k];
    s.count = count;
    s.seed = seed;
    s.init_desc = init == InitKind::Reference ? "reference" : "bv_density";
    s.sigma = std::sqrt(var_curve[s.n - 1]);
    if (!(s.sigma > 0)) throw NumericError("simulate: vanishing sigma_n");
    s.sorted = std::move(samples.columns[k]);
    double inv = 1.0 / s.sigma;
    for (double& v : s.sorted) v *= inv;
    std::sort(s.sorted.begin(), s.sorted.end());
    out.push_back(std::move(s));
  }
  return out;
}

SampleSet simulate(System& sys, int n, int64_t count, InitKind init, uint64_t seed,
                   int threads) {
  int one[1] = {n};
  return simulate_many(sys, one, count, init, seed, threads)[0];
}

double kolmogorov(const SampleSet& s) {
  double worst = 0.0;
  int64_t N = s.count;
  for (int64_t i = 0; i < N; ++i) {
    double phi = normal_cdf(s.sorted[i]);
    double hi = static_cast<double>(i + 1) / N;
    double lo = static_cast<double>(i) / N;
    worst = std::max(worst, std::max(std::abs(hi - phi), std::abs(lo - phi)));
  }
  return worst;
}

namespace {

// max over t >= t0 of (1 + t^p) * Phi(-t), golden-section on a log window.
double weighted_gauss_tail(double t0, double p) {
  auto g = [&](double t) { return (1.0 + std::pow(t, p)) * normal_cdf(-t); };
  double best = g(t0);
  for (double t = t0; t <= t0 + 12.0; t += 0.01) best = std::max(best, g(t));
  return best;
}

}  // namespace

double weighted_distance(const SampleSet& s, double p) {
  if (p < 0) throw DomainError("weighted_distance: p >= 0");
  // Convention: p = 0 is the uniform (unweighted) distance, not 2x it.
  if (p == 0.0) return kolmogorov(s);
  int64_t N = s.count;
  double worst = 0.0;
  for (int64_t i = 0; i < N; ++i) {
    double t = s.sorted[i];
    double w = 1.0 + std::pow(std::abs(t), p);
    double phi = normal_cdf(t);
    double hi = static_cast<double>(i + 1) / N;
    double lo = static_cast<double>(i) / N;
    worst = std::max(worst, w * std::max(std::abs(hi - phi), std::abs(lo - phi)));
  }
  // Tails: the empirical CDF is 0 left of the first sample and 1 right of
  // the last, so the weighted gap is the weighted Gaussian tail there.
  worst = std::max(worst, weighted_gauss_tail(std::max(0.0, s.sorted.back()), p));
  worst = std::max(worst, weighted_gauss_tail(std::max(0.0, -s.sorted.front()), p));
  return worst;
}

double lp_distance(const SampleSet& s, double p) {
  if (p < 1) throw DomainError("lp_distance: p >= 1");
  int64_t N = s.count;
  double total = 0.0;
  const double lo_inf = std::min(s.sorted.front(), -9.0);
  const double hi_inf = std::max(s.sorted.back(), 9.0);
  auto cell = [&](double a, double b, double level) {
    if (b <= a) return 0.0;
    // split where Phi crosses the level so the integrand stays smooth
    double split = a;
    if (level > 0.0 && level < 1.0) {
      double q = normal_quantile(level);
      if (q > a && q < b) split = q;
    }
    auto f = [&](double x) { return std::pow(std::abs(level - normal_cdf(x)), p); };
    double v = 0.0;
    if (split > a) v += gl16(f, a, split);
    v += gl16(f, split > a ? split : a, b);
    return v;
  };
  total += cell(lo_inf, s.sorted.front(), 0.0);
  for (int64_t i = 0; i + 1 < N; ++i)
    total += cell(s.sorted[i], s.sorted[i + 1], static_cast<double>(i + 1) / N);
  total += cell(s.sorted.back(), hi_inf, 1.0);
  return std::pow(total, 1.0 / p);
}

double wasserstein(const SampleSet& s, double p) {
  if (p < 1) throw DomainError("wasserstein: p >= 1");
  int64_t N = s.count;
  double total = 0.0;
  for (int64_t i = 0; i < N; ++i) {
    double u0 = static_cast<double>(i) / N;
    double u1 = static_cast<double>(i + 1) / N;
    double x = s.sorted[i];
    double mid = 0.5 * (u0 + u1), half = 0.5 * (u1 - u0);
    double acc = 0.0;
    for (int q = 0; q < 16; ++q) {
      double u = mid + half * kGlx[q];
      acc += kGlw[q] * std::pow(std::abs(x - normal_quantile(u)), p);
    }
    total += acc * half;
  }
  return std::pow(total, 1.0 / p);
}

double TestFunction::eval(double x) const {
  double t = std::clamp(x, -cap, cap);
  double s = 0.0;
  for (size_t k = coeff.size(); k-- > 0;) s = s * t + coeff[k];
  return s;
}

double TestFunction::deriv(double x) const {
  if (std::abs(x) >= cap) return 0.0;
  double s = 0.0;
  for (size_t k = coeff.size(); k-- > 1;) s = s * x + coeff[k] * static_cast<double>(k);
  return s;
}

GaussGapReport gaussian_expectation_gap(const SampleSet& s, const TestFunction& h,
                                        double s_exp) {
  GaussGapReport rep;
  double emp = 0.0;
  for (double v : s.sorted) emp += h.eval(v);
  emp /= static_cast<double>(s.count);
  // composite quadrature against the Gaussian out to 14 sigma; beyond the
  // cap the integrand is a constant times the density
  double gauss = 0.0;
  double reach = std::min(h.cap + 4.0, 14.0);
  const int cells = 256;
  for (int c = 0; c < cells; ++c) {
    double a = -reach + 2 * reach * c / cells;
    double b = -reach + 2 * reach * (c + 1) / cells;
    gauss += gl16([&](double x) { return h.eval(x) * normal_pdf(x); }, a, b);
  }
  gauss += h.eval(-reach - 1) * normal_cdf(-reach);
  gauss += h.eval(reach + 1) * normal_cdf(-reach);
  rep.gap = std::abs(emp - gauss);
  double hs = 0.0;
  const int hcells = 64;
  for (int c = 0; c < hcells; ++c) {
    double a = -h.cap + 2 * h.cap * c / hcells;
    double b = -h.cap + 2 * h.cap * (c + 1) / hcells;
    hs += gl16(
        [&](double x) { return std::abs(h.deriv(x)) / (1.0 + std::pow(std::abs(x), s_exp)); },
        a, b);
  }
  if (!std::isfinite(hs)) throw DomainError("gaussian_expectation_gap: divergent H_s");
  rep.h_s = hs;
  return rep;
}

DistanceReport distances(const SampleSet& s) {
  DistanceReport r;
  r.n = s.n;
  r.sigma = s.sigma;
  r.kolm = kolmogorov(s);
  r.d_p1 = weighted_distance(s, 1.0);
  r.d_p3 = weighted_distance(s, 3.0);
  r.l1 = lp_distance(s, 1.0);
  r.l2 = lp_distance(s, 2.0);
  r.w1 = wasserstein(s, 1.0);
  r.w2 = wasserstein(s, 2.0);
  r.mc_err = s.dkw95();
  return r;
}

std::vector<MomentRatioPoint> moment_ratio_from(std::span<const SampleSet> sets, int p) {
  std::vector<MomentRatioPoint> out;
  for (const SampleSet& s : sets) {
    double acc = 0.0;
    for (double v : s.sorted) acc += std::pow(std::abs(v), p);
    acc /= static_cast<double>(s.count);
    MomentRatioPoint pt;
    pt.n = s.n;
    pt.p_norm = s.sigma * std::pow(acc, 1.0 / p);
    pt.l2 = s.sigma;
    pt.ratio = pt.p_norm / (1.0 + pt.l2);
    out.push_back(pt);
  }
  return out;
}

TwoSidedGapReport two_sided_gap(System& sys, const TwoSidedObservable& psi,
                                const SinaiResult& sinai, int n_max, int paths,
                                CounterRng& rng) {
  if (!sys.is_sft()) throw DomainError("two_sided_gap: SFT systems only");
  TwoSidedGapReport rep;
  rep.bound = 2.0 * sinai.sup_u;
  int p = psi.past, f = psi.future;
  // Paths must carry enough past for psi_0 and enough future for the deeper
  // reduced tables at n_max - 1.
  const GibbsSystem& gs = sys.gibbs_sys(-p - 1, n_max + 2 * p + f + 2);
  int start = -p;
  int len = 2 * p + n_max + f + 2;
  std::vector<int> path;
  for (int it = 0; it < paths; ++it) {
    markov_sample_path(gs, start, len, rng, path);
    double s_two = 0.0, s_one = 0.0, worst = 0.0;
    for (int j = 0; j < n_max; ++j) {
      std::span<const int> w(path);
      // psi_j over coordinates [j-p, j+f]
      s_two += psi.eval(j, w.subspan(j, p + f + 1));
      // phi_j over [j, j + span - 1]
      const AnchoredTable& tab = sinai.phi[j - sinai.j0];
      int span = tab.table.word_basis()->depth;
      s_one += tab.eval(w.subspan(j + p, span));
      worst = std::max(worst, std::abs(s_two - s_one));
    }
    rep.a_hat = std::max(rep.a_hat, worst);
  }
  rep.pass = rep.a_hat <= rep.bound + 1e-12;
  return rep;
}

}  // namespace seqlim
