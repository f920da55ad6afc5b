#include "seqlim/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqlim/csv.hpp"
#include "seqlim/mc.hpp"
#include "seqlim/stats.hpp"

namespace seqlim {

namespace {

FieldFunction compose_word(System& sys, int j, const FieldFunction& g_next) {
  int d_in = g_next.word_basis()->depth;
  WordBasisPtr out_basis = sys.word_basis(j, d_in + 1);
  FieldFunction out = FieldFunction::word_zero(out_basis, j);
  const WordBasis& ob = *out_basis;
  for (int q = 0; q < ob.size(); ++q) {
    std::span<const int> w(ob.words[q]);
    int idx = g_next.word_basis()->index_of(w.subspan(1));
    if (idx < 0) throw DomainError("compose_word: inadmissible shifted word");
    out[q] = g_next[idx];
  }
  return out;
}

FieldFunction lift_word(System& sys, const FieldFunction& g, int depth) {
  int d0 = g.word_basis()->depth;
  if (d0 == depth) return g;
  WordBasisPtr basis = sys.word_basis(g.time(), depth);
  FieldFunction out = FieldFunction::word_zero(basis, g.time());
  for (int q = 0; q < basis->size(); ++q) {
    std::span<const int> w(basis->words[q]);
    int idx = g.word_basis()->index_of(w.subspan(0, d0));
    if (idx < 0) throw DomainError("lift_word: prefix not admissible");
    out[q] = g[idx];
  }
  return out;
}

FieldFunction advance_pulled(System& sys, int t, const FieldFunction& g) {
  const TransferOp& op = sys.pulled(t);
  if (g.kind() == BasisKind::Grid) return op.apply(g);
  int depth = g.word_basis()->depth;
  if (depth == 1) {
    FieldFunction out = FieldFunction::word_zero(sys.word_basis(t + 1, 1), t + 1);
    out.values() = op.apply_vec(g.values());
    return out;
  }
  return op.apply_word(g, sys.word_basis(t + 1, depth));
}

double sup_abs(const FieldFunction& g) {
  double s = 0;
  for (int i = 0; i < g.size(); ++i) s = std::max(s, std::abs(g[i]));
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tame calculus.

double TameFunction::eval(System& sys, double x) const {
  double v = a.interp_real(x);
  if (!b.empty()) {
    const IntervalStage& st = as_interval(sys.seq().stage_at(time));
    double y = apply_map(st, x);
    for (size_t k = 0; k < b.size(); ++k) v += b[k].interp_real(x) * g[k].interp_real(y);
  }
  return v;
}

FieldFunction tame_apply(System& sys, const TameFunction& t) {
  // L~(A + B (g o T)) = L~A + g . L~B, exactly.
  FieldFunction out = sys.pulled(t.time).apply(t.a);
  for (size_t k = 0; k < t.b.size(); ++k) {
    FieldFunction lb = sys.pulled(t.time).apply(t.b[k]);
    out += lb.pointwise(t.g[k]);
  }
  return out;
}

double tame_mean(System& sys, const TameFunction& t) {
  double v = sys.tilde_mean(t.time, t.a);
  for (size_t k = 0; k < t.b.size(); ++k) {
    FieldFunction lb = sys.pulled(t.time).apply(t.b[k]);
    v += sys.tilde_mean(t.time + 1, lb.pointwise(t.g[k]));
  }
  return v;
}

double tame_mean_product(System& sys, const FieldFunction& c, const TameFunction& t) {
  double v = sys.tilde_mean(t.time, c.pointwise(t.a));
  for (size_t k = 0; k < t.b.size(); ++k) {
    FieldFunction lcb = sys.pulled(t.time).apply(c.pointwise(t.b[k]));
    v += sys.tilde_mean(t.time + 1, lcb.pointwise(t.g[k]));
  }
  return v;
}

TameFunction tame_square(System& sys, const TameFunction& t) {
  (void)sys;
  TameFunction out;
  out.time = t.time;
  out.a = t.a.pointwise(t.a);
  // cross terms 2 A B_k (g_k o T) and products (B_j B_k)(g_j g_k o T)
  for (size_t k = 0; k < t.b.size(); ++k) {
    FieldFunction bk = t.b[k];
    bk *= Complex(2.0, 0.0);
    out.b.push_back(t.a.pointwise(bk));
    out.g.push_back(t.g[k]);
  }
  for (size_t j = 0; j < t.b.size(); ++j) {
    for (size_t k = j; k < t.b.size(); ++k) {
      FieldFunction bb = t.b[j].pointwise(t.b[k]);
      if (j != k) bb *= Complex(2.0, 0.0);
      out.b.push_back(std::move(bb));
      out.g.push_back(t.g[j].pointwise(t.g[k]));
    }
  }
  return out;
}

double tame_sup(System& sys, const TameFunction& t) {
  double worst = 0.0;
  if (t.b.empty()) return sup_abs(t.a);
  int G = t.a.grid_size();
  for (int i = 0; i < 2 * G - 1; ++i) {
    double x = 0.5 * i / (G - 1);
    worst = std::max(worst, std::abs(t.eval(sys, x)));
  }
  return worst;
}

// ---------------------------------------------------------------------------

MartingaleDecomposition decompose(System& sys, int j0, int j1, double tail_tol) {
  if (tail_tol <= 0) throw DomainError("decompose: tail_tol > 0");
  MartingaleDecomposition dec;
  dec.j0 = j0;
  dec.j1 = j1;
  dec.word = sys.is_sft();

  double rate = sys.pilot_rate();
  if (!(rate < 1.0))
    throw NumericError("decompose: pulled operators do not contract (covering failure)");

  // u_j stream: the full series via the recurrence u_{j+1} = L~_j(f~_j + u_j)
  // (innermost, largest-k terms first). Observables before j0 are zero, so
  // u_{j0} = 0 exactly.
  dec.u.push_back(dec.word ? FieldFunction::word_zero(sys.word_basis(j0, 1), j0)
                           : sys.zero(j0));
  for (int j = j0; j <= j1; ++j) {
    FieldFunction s = sys.obs_centered(j);
    s += dec.u[j - j0];
    dec.u.push_back(advance_pulled(sys, j, s));
  }
  double sup_f = 0.0;
  for (int j = j0; j <= j1; ++j) {
    sup_f = std::max(sup_f, bv(sys.obs_centered(j)));
    dec.sup_u = std::max(dec.sup_u, sup_abs(dec.u[j - j0]));
    dec.sup_u_bv = std::max(dec.sup_u_bv, bv(dec.u[j - j0]));
  }
  dec.tail_bound = sup_f * std::pow(rate, std::max(j0, 1)) / (1.0 - rate);

  for (int j = j0; j <= j1; ++j) {
    const FieldFunction& ft = sys.obs_centered(j);
    const FieldFunction& uj = dec.u[j - j0];
    const FieldFunction& un = dec.u[j + 1 - j0];
    if (dec.word) {
      FieldFunction ut = compose_word(sys, j, un);
      int depth = ut.word_basis()->depth;
      FieldFunction mj = lift_word(sys, ft, depth);
      mj += lift_word(sys, uj, depth);
      mj -= ut;
      FieldFunction lm = advance_pulled(sys, j, mj);
      dec.max_reverse_residual = std::max(dec.max_reverse_residual, sup_abs(lm));
      FieldFunction rec = mj;
      rec += ut;
      rec -= lift_word(sys, uj, depth);
      rec -= lift_word(sys, ft, depth);
      dec.max_reconstruction = std::max(dec.max_reconstruction, sup_abs(rec));
      dec.m_word.push_back(std::move(mj));
    } else {
      TameFunction mj;
      mj.time = j;
      mj.a = ft;
      mj.a += uj;
      FieldFunction neg = un;
      neg *= Complex(-1.0, 0.0);
      mj.b.push_back(sys.one(j));
      mj.g.push_back(std::move(neg));
      // L~ M = L~(f~ + u_j) - u_{j+1}, with the composed term pulled through
      // exactly; the residual probes a fresh arithmetic path.
      FieldFunction lm = tame_apply(sys, mj);
      dec.max_reverse_residual = std::max(dec.max_reverse_residual, sup_abs(lm));
      // pointwise reconstruction on nodes and midpoints, composition exact
      const IntervalStage& st = as_interval(sys.seq().stage_at(j));
      double worst = 0.0;
      int G = mj.a.grid_size();
      for (int i = 0; i < 2 * G - 1; i += 3) {
        double x = 0.5 * i / (G - 1);
        double lhs = ft.interp_real(x);
        double rhs = mj.eval(sys, x) + un.interp_real(apply_map(st, x)) -
                     uj.interp_real(x);
        worst = std::max(worst, std::abs(lhs - rhs));
      }
      dec.max_reconstruction = std::max(dec.max_reconstruction, worst);
      dec.m_tame.push_back(std::move(mj));
    }
  }
  return dec;
}

namespace {

// Quadrature moments of a TameFunction against the pulled measure: per-cell
// two-point Gauss with cells cut at branch boundaries, the integrand
// evaluated through the exact composition. This avoids the O(h^2)
// interpolation noise of the duality route, which matters for near-zero
// martingale parts.
double tame_moment_quadrature(System& sys, const TameFunction& t, int power) {
  const FieldFunction& rho = sys.rho(t.time);
  const IntervalStage& st = as_interval(sys.seq().stage_at(t.time));
  int G = rho.grid_size();
  const double r = 0.5773502691896257;
  double total = 0.0;
  for (int i = 0; i + 1 < G; ++i) {
    double a = static_cast<double>(i) / (G - 1);
    double b = static_cast<double>(i + 1) / (G - 1);
    double cuts[4] = {a, b, b, b};
    int nc = 1;
    for (const Branch& br : st.branches)
      if (br.lo > a && br.lo < b && nc < 3) cuts[nc++] = br.lo;
    cuts[nc] = b;
    std::sort(cuts, cuts + nc + 1);
    for (int c = 0; c < nc; ++c) {
      double mid = 0.5 * (cuts[c] + cuts[c + 1]);
      double half = 0.5 * (cuts[c + 1] - cuts[c]);
      if (half <= 0) continue;
      for (double s : {-r, r}) {
        double x = mid + half * s;
        total += half * std::pow(t.eval(sys, x), power) * rho.interp_real(x);
      }
    }
  }
  return total;
}

}  // namespace

double MartingaleDecomposition::martingale_variance(System& sys, int j) const {
  if (j < j0 || j > j1) throw DomainError("martingale_variance: outside window");
  if (word) {
    const FieldFunction& mj = m_word[j - j0];
    double m1 = sys.tilde_mean(j, mj);
    return sys.tilde_mean(j, mj.pointwise(mj)) - m1 * m1;
  }
  const TameFunction& mj = m_tame[j - j0];
  double m1 = tame_moment_quadrature(sys, mj, 1);
  return tame_moment_quadrature(sys, mj, 2) - m1 * m1;
}

std::string MartingaleDecomposition::to_csv(System& sys) const {
  std::ostringstream ss;
  ss << "j,u_bv,m_sup,martingale_variance\n";
  for (int j = j0; j <= j1; ++j) {
    double msup = word ? sup_abs(m_word[j - j0]) : tame_sup(sys, m_tame[j - j0]);
    ss << j << ',' << CsvWriter::num(bv(u[j - j0])) << ',' << CsvWriter::num(msup)
       << ',' << CsvWriter::num(martingale_variance(sys, j)) << '\n';
  }
  return ss.str();
}

// ---------------------------------------------------------------------------

VarianceAccumulator::VarianceAccumulator(System& sys, int start_time)
    : sys_(sys), t_(start_time), floor_(sys.options().cov_floor) {}

void VarianceAccumulator::advance_buffer(FieldFunction&& fresh) {
  int horizon = sys_.cov_horizon();
  std::deque<FieldFunction> next;
  for (FieldFunction& v : buffer_) {
    FieldFunction w = advance_pulled(sys_, t_, v);
    if (sup_abs(w) > floor_) next.push_back(std::move(w));
  }
  if (sup_abs(fresh) > floor_) next.push_back(std::move(fresh));
  while (static_cast<int>(next.size()) > horizon) next.pop_front();
  buffer_ = std::move(next);
  ++t_;
}

double VarianceAccumulator::step(const FieldFunction& centered) {
  double cross = 0.0;
  for (const FieldFunction& v : buffer_)
    cross += sys_.tilde_mean(t_, v.pointwise(centered));
  double diag = sys_.tilde_mean(t_, centered.pointwise(centered));
  var_ += diag + 2.0 * cross;
  advance_buffer(advance_pulled(sys_, t_, centered));
  return var_;
}

double VarianceAccumulator::step(const TameFunction& centered) {
  if (centered.time != t_) throw DomainError("VarianceAccumulator: time mismatch");
  double cross = 0.0;
  for (const FieldFunction& v : buffer_)
    cross += tame_mean_product(sys_, v, centered);
  TameFunction sq = tame_square(sys_, centered);
  double diag = tame_mean(sys_, sq);
  var_ += diag + 2.0 * cross;
  advance_buffer(tame_apply(sys_, centered));
  return var_;
}

double exact_variance(System& sys, int j, int n) {
  VarianceAccumulator acc(sys, j);
  double v = 0.0;
  for (int t = j; t < j + n; ++t) v = acc.step(sys.obs_centered(t));
  return v;
}

std::vector<double> variance_curve(System& sys, int j, int n_max) {
  VarianceAccumulator acc(sys, j);
  std::vector<double> out;
  out.reserve(n_max);
  for (int t = j; t < j + n_max; ++t) out.push_back(acc.step(sys.obs_centered(t)));
  return out;
}

DichotomyReport variance_dichotomy(System& sys, int n_max) {
  DichotomyReport rep;
  rep.var_curve = variance_curve(sys, 0, n_max);
  MartingaleDecomposition dec = decompose(sys, 0, std::min(n_max, 4096));
  rep.sup_u = dec.sup_u;
  rep.l2_gap_bound = 2.0 * dec.sup_u;
  double cum = 0.0;
  for (int j = dec.j0; j <= dec.j1; ++j) {
    cum += dec.martingale_variance(sys, j);
    rep.martingale_cum.push_back(cum);
  }
  size_t q = rep.martingale_cum.size();
  double inc = 0.0;
  for (size_t k = q - q / 4; k < q; ++k)
    inc = std::max(inc, rep.martingale_cum[k] - rep.martingale_cum[k - 1]);
  rep.tail_increment = inc;
  rep.bounded = inc < rep.threshold;
  return rep;
}

std::vector<MomentRatioPoint> moment_ratio(System& sys, std::span<const int> n_list,
                                           int p, int64_t sample_count, uint64_t seed,
                                           int threads) {
  if (p != 2 && p != 4 && p != 8)
    throw DomainError("moment_ratio: p must be a power of two (2, 4, 8)");
  if (sample_count < 100000)
    throw DomainError("moment_ratio: at least 1e5 samples required");
  std::vector<int> ns(n_list.begin(), n_list.end());
  std::sort(ns.begin(), ns.end());
  PrefixMoments mom = collect_prefix_moments(sys, ns, sample_count, p, seed, threads);
  std::vector<double> var_curve = variance_curve(sys, 0, ns.back());
  std::vector<MomentRatioPoint> out;
  for (size_t k = 0; k < ns.size(); ++k) {
    MomentRatioPoint pt;
    pt.n = ns[k];
    pt.p_norm = std::pow(mom.abs_p[k], 1.0 / p);
    pt.l2 = std::sqrt(var_curve[ns[k] - 1]);
    pt.ratio = pt.p_norm / (1.0 + pt.l2);
    out.push_back(pt);
  }
  return out;
}

QvReport quadratic_variation_ratio(System& sys, int j, int n) {
  MartingaleDecomposition dec = decompose(sys, 0, j + n);
  QvReport rep;
  VarianceAccumulator acc(sys, j);
  for (int t = j; t < j + n; ++t) {
    if (dec.word) {
      FieldFunction q = dec.m_word[t].pointwise(dec.m_word[t]);
      double c = sys.tilde_mean(t, q);
      for (int i = 0; i < q.size(); ++i) q[i] -= c;
      rep.var_q = acc.step(q);
    } else {
      TameFunction q = tame_square(sys, dec.m_tame[t]);
      double c = tame_mean(sys, q);
      for (int i = 0; i < q.a.size(); ++i) q.a[i] -= c;
      rep.var_q = acc.step(q);
    }
  }
  rep.var_f = exact_variance(sys, j, n);
  rep.ratio = rep.var_q / (1.0 + rep.var_f);
  return rep;
}

}  // namespace seqlim
