#include "seqlim/system.hpp"

#include <algorithm>
#include <cmath>

#include "seqlim/stats.hpp"

namespace seqlim {

System::System(MapSequence seq, SystemOptions opt) : seq_(std::move(seq)), opt_(opt) {
  seq_.validate();
}

const Stage& System::stage_ext(int j) const {
  if (j >= 0) return seq_.stage_at(j);
  if (seq_.extendable()) return seq_.stage_at_extended(j);
  return seq_.stage_at(0);  // rank-one device clamps the stream at time zero
}

void System::set_initial_density(const TrigObservable& rho0) {
  rho0_form_ = rho0;
  rho_.clear();
  pulled_ops_.clear();
  obs_centered_.clear();
  obs_center_val_.clear();
}

void System::set_reference_weights(std::map<int, FieldFunction> w) {
  ref_weights_ = std::move(w);
  ops_.clear();
  pulled_ops_.clear();
  rho_.clear();
  obs_centered_.clear();
  obs_center_val_.clear();
  pilot_rate_.reset();
}

void System::ensure_gibbs(int j_lo, int j_hi) {
  if (!is_sft()) throw DomainError("gibbs layer requested for an interval system");
  if (gibbs_ && gibbs_->j0 <= j_lo && gibbs_->j1 >= j_hi) return;
  int lo = std::min(j_lo, gibbs_ ? gibbs_->j0 : 0);
  int hi = std::max(j_hi, gibbs_ ? gibbs_->j1 : 8);
  // Grow in chunks so repeated extensions stay cheap.
  lo = std::min(lo, -8);
  hi = std::max(hi + 8, hi);
  if (!seq_.extendable()) lo = std::max(lo, 0);
  gibbs_ = std::make_unique<GibbsSystem>(gibbs_build(seq_, lo, hi, opt_.gibbs_burn));
  // Word bases carry cylinder weights from the previous window; rebuild.
  word_bases_.clear();
}

const GibbsSystem& System::gibbs_sys(int j_lo, int j_hi) {
  ensure_gibbs(j_lo, j_hi);
  return *gibbs_;
}

WordBasisPtr System::word_basis(int j, int depth) {
  auto key = std::make_pair(j, depth);
  auto it = word_bases_.find(key);
  if (it != word_bases_.end()) return it->second;
  ensure_gibbs(j, j + depth - 1 + 1);
  WordBasisPtr wb = make_word_basis(seq_, j, depth, gibbs_.get(), opt_.holder_alpha);
  word_bases_[key] = wb;
  return wb;
}

TransferOp System::sft_raw(int j) {
  return assemble_sft(as_sft(stage_ext(j)), j);
}

TransferOp System::build_op(int j) {
  if (is_sft()) {
    ensure_gibbs(j, j + 1);
    TransferOp raw = sft_raw(j);
    const Eigen::VectorXd& hj = gibbs_->h_at(j);
    const Eigen::VectorXd& hn = gibbs_->h_at(j + 1);
    double lam = gibbs_->lambda_at(j);
    Eigen::VectorXcd pre = hj.cast<Complex>();
    Eigen::VectorXcd post(hn.size());
    for (int i = 0; i < hn.size(); ++i) post[i] = 1.0 / (lam * hn[i]);
    return raw.with_pre(pre, OpKind::Normalized).with_post(post, OpKind::Normalized);
  }
  TransferOp raw = assemble_interval(as_interval(stage_ext(j)), opt_.grid, j);
  if (!ref_weights_.empty()) {
    auto wj = ref_weights_.find(j);
    auto wn = ref_weights_.find(j + 1);
    if (wj == ref_weights_.end() || wn == ref_weights_.end())
      throw DomainError("reference weights missing at time " + std::to_string(j));
    Eigen::VectorXcd post(wn->second.size());
    for (int i = 0; i < post.size(); ++i) {
      Complex v = wn->second[i];
      if (std::abs(v) < 1e-12)
        throw NumericError("singular reference density at time " + std::to_string(j + 1));
      post[i] = 1.0 / v;
    }
    return raw.with_pre(wj->second.values(), OpKind::Normalized)
        .with_post(post, OpKind::Normalized);
  }
  return raw;
}

int System::schedule_period() const {
  const auto* sp = std::get_if<PeriodicSchedule>(&seq_.schedule());
  if (!sp) return 0;
  int P = static_cast<int>(sp->order.size());
  if (seq_.observable_count() > 1) {
    const auto* op_ = std::get_if<PeriodicSchedule>(&seq_.observable_schedule());
    if (!op_) return 0;
    int Q = static_cast<int>(op_->order.size());
    // combined period of the stage and observable schedules
    int l = P;
    while (l % Q != 0) l += P;
    P = l;
  }
  return P;
}

int System::canonical_time(int j) {
  int P = schedule_period();
  if (P <= 0 || j < 0) return j;
  if (rho_stationary_ < 0 || j < rho_stationary_ + P) return j;
  return rho_stationary_ + (j - rho_stationary_) % P;
}

const TransferOp& System::op(int j) {
  // Raw interval operators repeat with the schedule; share them.
  if (!is_sft() && ref_weights_.empty() && j >= 0) {
    int P = schedule_period();
    if (P > 0) j = j % P;
  }
  auto it = ops_.find(j);
  if (it != ops_.end()) return it->second;
  return ops_.emplace(j, build_op(j)).first->second;
}

const FieldFunction& System::rho(int j) {
  j = canonical_time(j);
  auto it = rho_.find(j);
  if (it != rho_.end()) return it->second;
  if (j == 0) {
    FieldFunction r0 = one(0);
    if (rho0_form_) {
      if (is_sft()) throw DomainError("initial densities apply to interval systems");
      r0 = sample(0, [&](double x) { return rho0_form_->eval(x); });
      double m = ref_mean(0, r0);
      if (!(m > 0)) throw NumericError("initial density with nonpositive mass");
      r0 *= Complex(1.0 / m, 0.0);
      for (int i = 0; i < r0.size(); ++i)
        if (r0[i].real() < 1e-12)
          throw NumericError("initial density must be bounded away from zero");
    }
    return rho_.emplace(0, std::move(r0)).first->second;
  }
  if (j < 0) throw DomainError("pulled densities start at time zero");
  FieldFunction next = op(j - 1).apply(rho(j - 1));
  // Keep m~_j a probability measure: collocation conserves mass only to
  // quadrature order.
  double m = ref_mean(j, next);
  if (!(m > 1e-12)) throw NumericError("pulled density degenerated");
  next *= Complex(1.0 / m, 0.0);
  // Detect the periodic regime so long horizons stop growing the caches.
  int P = schedule_period();
  if (P > 0 && rho_stationary_ < 0 && j >= P) {
    auto prev = rho_.find(j - P);
    if (prev != rho_.end()) {
      double gap = 0.0;
      for (int i = 0; i < next.size(); ++i)
        gap = std::max(gap, std::abs(next[i] - prev->second[i]));
      if (gap < 1e-15) rho_stationary_ = j - P;
    }
  }
  return rho_.emplace(j, std::move(next)).first->second;
}

TransferOp System::op_at(int j) {
  TransferOp copy = op(j);
  copy.time = j;
  return copy;
}

const TransferOp& System::pulled(int j) {
  j = canonical_time(j);
  auto it = pulled_ops_.find(j);
  if (it != pulled_ops_.end()) return it->second;
  const FieldFunction& rj = rho(j);
  const FieldFunction& rn = rho(j + 1);
  TransferOp base = op(j);
  Eigen::VectorXcd post(rn.size());
  for (int i = 0; i < post.size(); ++i) {
    Complex v = rn[i];
    if (std::abs(v) < 1e-12)
      throw NumericError("singular pulled density at time " + std::to_string(j + 1));
    post[i] = 1.0 / v;
  }
  TransferOp out =
      base.with_pre(rj.values(), OpKind::PulledBack).with_post(post, OpKind::PulledBack);
  return pulled_ops_.emplace(j, std::move(out)).first->second;
}

TransferOp System::twisted(int j, Complex z, bool centered) {
  const FieldFunction& f = centered ? obs_centered(j) : obs(j);
  Eigen::VectorXcd mult(f.size());
  for (int i = 0; i < f.size(); ++i) mult[i] = std::exp(z * f[i]);
  return op(j).with_pre(mult, OpKind::Twisted, z);
}

TransferOp System::pulled_twisted(int j, Complex z, bool centered) {
  const FieldFunction& f = centered ? obs_centered(j) : obs(j);
  Eigen::VectorXcd mult(f.size());
  for (int i = 0; i < f.size(); ++i) mult[i] = std::exp(z * f[i]);
  return pulled(j).with_pre(mult, OpKind::Twisted, z);
}

Eigen::VectorXd System::ref_weights_vec(int j) {
  if (is_sft()) {
    ensure_gibbs(j, j);
    return gibbs_->pi_at(j);
  }
  FieldFunction probe = one(j);
  Eigen::VectorXd w = probe.quadrature_weights();
  if (!ref_weights_.empty()) {
    auto it = ref_weights_.find(j);
    if (it == ref_weights_.end())
      throw DomainError("reference weights missing at time " + std::to_string(j));
    for (int i = 0; i < w.size(); ++i) w[i] *= it->second[i].real();
  }
  return w;
}

Eigen::VectorXd System::tilde_weights_vec(int j) {
  Eigen::VectorXd w = ref_weights_vec(j);
  const FieldFunction& r = rho(j);
  for (int i = 0; i < w.size(); ++i) w[i] *= r[i].real();
  return w;
}

double System::ref_mean(int j, const FieldFunction& g) {
  return ref_mean_c(j, g).real();
}

Complex System::ref_mean_c(int j, const FieldFunction& g) {
  // Word-basis weights are the exact cylinder masses of the reference
  // measure, at any depth.
  if (g.kind() == BasisKind::Word) return mean(g);
  Eigen::VectorXd w = ref_weights_vec(j);
  if (w.size() != g.size()) throw DomainError("ref_mean: basis mismatch");
  Complex s = 0.0;
  for (int i = 0; i < w.size(); ++i) s += w[i] * g[i];
  return s;
}

double System::tilde_mean(int j, const FieldFunction& g) {
  return tilde_mean_c(j, g).real();
}

Complex System::tilde_mean_c(int j, const FieldFunction& g) {
  // Symbolic references are equivariant, so the pulled measures coincide
  // with them.
  if (g.kind() == BasisKind::Word) return mean(g);
  const FieldFunction& r = rho(j);
  Eigen::VectorXd w = ref_weights_vec(j);
  Complex s = 0.0;
  for (int i = 0; i < w.size(); ++i) s += w[i] * r[i] * g[i];
  return s;
}

double System::obs_eval_point(int j, double x) const {
  const Observable& o = seq_.observable_at(j);
  if (const auto* t = std::get_if<TrigObservable>(&o)) return t->eval(x);
  if (const auto* c = std::get_if<CoboundaryObservable>(&o)) {
    const IntervalStage& st = as_interval(stage_ext(j));
    return c->inner.eval(apply_map(st, x)) - c->inner.eval(x) + c->extra.eval(x);
  }
  throw DomainError("symbol observable on an interval point");
}

double System::obs_eval_symbol(int j, int a) const {
  const Observable& o = seq_.observable_at(j);
  if (const auto* s = std::get_if<SymbolObservable>(&o)) return s->values[a];
  throw DomainError("point observable on a symbol");
}

const FieldFunction& System::obs(int j) {
  if (j >= 0) j = canonical_time(j);
  auto it = obs_.find(j);
  if (it != obs_.end()) return it->second;
  FieldFunction f = is_sft() ? FieldFunction::word_zero(word_basis(j, 1), j)
                             : FieldFunction::grid_zero(opt_.grid, j);
  if (is_sft()) {
    for (int a = 0; a < f.size(); ++a) f[a] = obs_eval_symbol(j, a);
  } else {
    for (int i = 0; i < f.size(); ++i) f[i] = obs_eval_point(j, f.node(i));
  }
  return obs_.emplace(j, std::move(f)).first->second;
}

double System::obs_center(int j) {
  if (j >= 0) j = canonical_time(j);
  auto it = obs_center_val_.find(j);
  if (it != obs_center_val_.end()) return it->second;
  // Pulled measures exist from time zero on; burn-in sweeps through negative
  // times center with the reference mean instead (any bounded choice there
  // is washed out geometrically).
  double c = j >= 0 ? tilde_mean(j, obs(j)) : ref_mean(j, obs(j));
  obs_center_val_[j] = c;
  return c;
}

const FieldFunction& System::obs_centered(int j) {
  if (j >= 0) j = canonical_time(j);
  auto it = obs_centered_.find(j);
  if (it != obs_centered_.end()) return it->second;
  FieldFunction f = obs(j);
  double c = obs_center(j);
  for (int i = 0; i < f.size(); ++i) f[i] -= c;
  return obs_centered_.emplace(j, std::move(f)).first->second;
}

FieldFunction System::one(int j) {
  if (is_sft()) return FieldFunction::word_constant(word_basis(j, 1), 1.0, j);
  return FieldFunction::grid_constant(opt_.grid, 1.0, j);
}

FieldFunction System::zero(int j) {
  if (is_sft()) return FieldFunction::word_zero(word_basis(j, 1), j);
  return FieldFunction::grid_zero(opt_.grid, j);
}

FieldFunction System::sample(int j, const std::function<double(double)>& f) {
  if (is_sft()) throw DomainError("sample: interval systems only");
  return FieldFunction::grid_sample(opt_.grid, f, j);
}

double System::pilot_rate() {
  if (pilot_rate_) return *pilot_rate_;
  // Push a few mean-zero functions and fit the BV decay.
  std::vector<FieldFunction> gs;
  if (is_sft()) {
    FieldFunction g = zero(0);
    for (int i = 0; i < g.size(); ++i) g[i] = (i % 2 == 0) ? 1.0 : -1.0;
    Complex m = ref_mean_c(0, g);
    for (int i = 0; i < g.size(); ++i) g[i] -= m;
    gs.push_back(g);
  } else {
    gs.push_back(sample(0, [](double x) { return std::cos(kTwoPi * x); }));
    gs.push_back(sample(0, [](double x) { return x < 0.37 ? 1.0 : -1.0; }));
    for (auto& g : gs) {
      Complex m = ref_mean_c(0, g);
      for (int i = 0; i < g.size(); ++i) g[i] -= m;
    }
  }
  const int n_max = 48;
  double worst = 0.05;
  for (auto& g : gs) {
    std::vector<double> norms;
    FieldFunction v = g;
    for (int n = 1; n <= n_max; ++n) {
      v = op(n - 1).apply(v);
      Complex m = ref_mean_c(n, v);
      FieldFunction centered = v;
      for (int i = 0; i < centered.size(); ++i) centered[i] -= m;
      norms.push_back(bv(centered));
    }
    DecayFit fit = fit_geometric(norms, 1, 1e-13);
    if (fit.points >= 4 && fit.rate > 0 && fit.rate < 1) worst = std::max(worst, fit.rate);
  }
  pilot_rate_ = std::min(worst, 0.995);
  return *pilot_rate_;
}

int System::default_burn_in() {
  if (opt_.burn_in > 0) return opt_.burn_in;
  double r = pilot_rate();
  int k = static_cast<int>(std::ceil(std::log(1e-12) / std::log(r)));
  return std::clamp(k, 8, 400);
}

int System::cov_horizon() {
  double r = pilot_rate();
  int k = static_cast<int>(std::ceil(std::log(1e-17) / std::log(r)));
  return std::clamp(k, 8, opt_.max_cov_horizon);
}

// ---------------------------------------------------------------------------
// Hypothesis verification.

namespace {

FieldFunction random_bv_function(System& sys, CounterRng& rng, int time) {
  if (sys.is_sft()) {
    FieldFunction g = sys.zero(time);
    for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
    return g;
  }
  // Trig polynomial plus a random step profile: both smooth and
  // jump-dominated variation shapes.
  int modes = 1 + static_cast<int>(rng.uniform_int(4));
  std::vector<double> ac(modes), as(modes);
  for (int k = 0; k < modes; ++k) {
    ac[k] = rng.uniform(-1.0, 1.0);
    as[k] = rng.uniform(-1.0, 1.0);
  }
  int jumps = static_cast<int>(rng.uniform_int(4));
  std::vector<double> pos(jumps), amp(jumps);
  for (int k = 0; k < jumps; ++k) {
    pos[k] = rng.uniform();
    amp[k] = rng.uniform(-1.0, 1.0);
  }
  return sys.sample(time, [&](double x) {
    double s = 0.0;
    for (int k = 0; k < modes; ++k)
      s += ac[k] * std::cos(kTwoPi * (k + 1) * x) + as[k] * std::sin(kTwoPi * (k + 1) * x);
    for (int k = 0; k < jumps; ++k)
      if (x >= pos[k]) s += amp[k];
    return s;
  });
}

}  // namespace

LyReport verify_ly(System& sys, int j, int N, int sample_count, CounterRng& rng) {
  if (N < 1) throw DomainError("verify_ly: N >= 1");
  struct Pt {
    double var_in, l1_in, var_out;
  };
  std::vector<Pt> pts;
  for (int s = 0; s < sample_count; ++s) {
    FieldFunction g = random_bv_function(sys, rng, j);
    double vi = variation(g), li = l1_norm(g);
    if (vi < 1e-12) continue;
    FieldFunction v = g;
    for (int k = 0; k < N; ++k) v = sys.op(j + k).apply(v);
    pts.push_back({vi, li, variation(v)});
  }
  LyReport rep;
  double best_rho = std::numeric_limits<double>::infinity(), best_k = 0;
  for (double K = 0.0; K <= 64.0; K = (K == 0.0 ? 0.25 : K * 1.5)) {
    double rho = 0.0;
    for (const Pt& p : pts) rho = std::max(rho, (p.var_out - K * p.l1_in) / p.var_in);
    if (rho < best_rho) {
      best_rho = rho;
      best_k = K;
    }
  }
  rep.rho_hat = best_rho;
  rep.k_hat = best_k;
  rep.pass = best_rho < 1.0;
  return rep;
}

ScReport verify_sc(System& sys, double a, int horizon, int sample_count, CounterRng& rng,
                   int j_window) {
  if (a <= 0) throw DomainError("verify_sc: a > 0");
  if (horizon < 1) throw DomainError("verify_sc: horizon >= 1");
  ScReport rep;
  // worst_alpha[n-1]: smallest min(L^n h)/m(h) across samples and start times
  std::vector<double> worst_alpha(horizon, std::numeric_limits<double>::infinity());
  for (int j = 0; j < j_window; ++j) {
    for (int s = 0; s < sample_count; ++s) {
      FieldFunction g = random_bv_function(sys, rng, j);
      // Shift and scale into the cone: h = c + t (g - min g) with
      // variation(h) <= a m(h) enforced by the choice of t.
      double gmin = std::numeric_limits<double>::infinity();
      for (int i = 0; i < g.size(); ++i) gmin = std::min(gmin, g[i].real());
      FieldFunction h = g;
      for (int i = 0; i < h.size(); ++i) h[i] -= gmin;
      double var = variation(h);
      double m = sys.ref_mean(j, h);
      double c = (var > a * m) ? (var / a - m) + 1e-9 : 1e-9;
      for (int i = 0; i < h.size(); ++i) h[i] += c;
      m = sys.ref_mean(j, h);
      FieldFunction v = h;
      for (int n = 1; n <= horizon; ++n) {
        v = sys.op(j + n - 1).apply(v);
        double mn = std::numeric_limits<double>::infinity();
        for (int i = 0; i < v.size(); ++i) mn = std::min(mn, v[i].real());
        worst_alpha[n - 1] = std::min(worst_alpha[n - 1], mn / m);
      }
    }
  }
  for (int n = 1; n <= horizon; ++n) {
    if (worst_alpha[n - 1] > 1e-9) {
      rep.n_a = n;
      rep.alpha_a = worst_alpha[n - 1];
      rep.pass = true;
      return rep;
    }
  }
  rep.pass = false;
  rep.n_a = horizon;
  rep.alpha_a = worst_alpha[horizon - 1];
  return rep;
}

MinScReport verify_min_implies_sc(System& sys, int horizon, double a) {
  MinScReport rep;
  FieldFunction v = sys.one(0);
  double delta0 = std::numeric_limits<double>::infinity();
  double supnorm = 1.0;
  for (int n = 1; n <= horizon; ++n) {
    v = sys.op(n - 1).apply(v);
    double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
    for (int i = 0; i < v.size(); ++i) {
      mn = std::min(mn, v[i].real());
      mx = std::max(mx, std::abs(v[i]));
    }
    delta0 = std::min(delta0, mn);
    supnorm = std::max(supnorm, mx);
  }
  rep.delta0 = delta0;
  if (delta0 <= 1e-9) {
    rep.applicable = false;
    return rep;
  }
  rep.delta2 = delta0 / supnorm;
  // Mean-zero decay constant.
  CounterRng rng = CounterRng::substream(17, "min_sc");
  double c1 = 0.0, rate = 0.0;
  for (int s = 0; s < 4; ++s) {
    FieldFunction g = random_bv_function(sys, rng, 0);
    Complex m = sys.ref_mean_c(0, g);
    for (int i = 0; i < g.size(); ++i) g[i] -= m;
    double b0 = bv(g);
    std::vector<double> norms;
    FieldFunction w = g;
    for (int n = 1; n <= std::min(horizon, 60); ++n) {
      w = sys.op(n - 1).apply(w);
      norms.push_back(bv(w));
    }
    DecayFit fit = fit_geometric(norms, 1, 1e-14);
    if (fit.points >= 3) {
      rate = std::max(rate, fit.rate);
      c1 = std::max(c1, fit.prefactor / std::max(b0, 1e-12));
    }
  }
  rep.decay_rate = rate;
  rep.decay_prefactor = c1;
  double c3 = c1 * (1.0 + a);
  double target = 0.5 * rep.delta2;
  int n_a = 1;
  if (rate > 0 && rate < 1) {
    while (n_a < horizon && c3 * std::pow(rate, n_a) > target) ++n_a;
  }
  rep.n_a = n_a;
  rep.alpha_a = 0.5 * rep.delta2;
  rep.applicable = true;
  return rep;
}

// ---------------------------------------------------------------------------
// Quadrature helpers. Two-point Gauss rule per grid cell, cells split at
// branch boundaries; closed-form integrands keep the error at O(h^4).

namespace {

double gauss2_cell(const std::function<double(double)>& f, double a, double b) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const double r = 0.5773502691896257;
  return half * (f(mid - half * r) + f(mid + half * r));
}

}  // namespace

double integrate_against(const TrigObservable& f, const FieldFunction& w) {
  if (!w.is_grid()) throw DomainError("integrate_against: grid functions only");
  double s = 0.0;
  int G = w.grid_size();
  for (int i = 0; i + 1 < G; ++i) {
    double a = w.node(i), b = w.node(i + 1);
    s += gauss2_cell([&](double x) { return f.eval(x) * w.interp_real(x); }, a, b);
  }
  return s;
}

double integrate_pullback(System& sys, int j, const TrigObservable& f,
                          const FieldFunction& w) {
  if (sys.is_sft()) throw DomainError("integrate_pullback: interval systems only");
  const IntervalStage& st = as_interval(sys.seq().stage_at(j));
  int G = w.grid_size();
  double s = 0.0;
  for (int i = 0; i + 1 < G; ++i) {
    double a = w.node(i), b = w.node(i + 1);
    // split the cell at any branch boundary crossing it
    std::vector<double> cuts{a};
    for (const Branch& br : st.branches)
      if (br.lo > a && br.lo < b) cuts.push_back(br.lo);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    for (size_t k = 0; k + 1 < cuts.size(); ++k) {
      s += gauss2_cell(
          [&](double x) { return f.eval(apply_map(st, x)) * w.interp_real(x); },
          cuts[k], cuts[k + 1]);
    }
  }
  return s;
}

double duality_gap(System& sys, int j, const TrigObservable& f, const FieldFunction& g) {
  if (sys.is_sft())
    throw DomainError("duality_gap: use matrix identities for SFT systems");
  double lhs = integrate_pullback(sys, j, f, g.real_part());
  FieldFunction Lg = sys.op(j).apply(g);
  double rhs = integrate_against(f, Lg.real_part());
  return std::abs(lhs - rhs);
}

}  // namespace seqlim
