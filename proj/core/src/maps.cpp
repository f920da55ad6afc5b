#include "seqlim/maps.hpp"

#include <algorithm>
#include <cmath>

#include "seqlim/rng.hpp"

namespace seqlim {

namespace {

double poly_eval(const std::vector<double>& c, double x) {
  double s = 0;
  for (size_t k = c.size(); k-- > 0;) s = s * x + c[k];
  return s;
}

std::vector<double> poly_deriv(const std::vector<double>& c) {
  std::vector<double> d;
  for (size_t k = 1; k < c.size(); ++k) d.push_back(c[k] * static_cast<double>(k));
  if (d.empty()) d.push_back(0.0);
  return d;
}

}  // namespace

double Branch::eval(double x) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineForm>) return f.a * x + f.b;
        if constexpr (std::is_same_v<T, MoebiusForm>)
          return (f.a * x + f.b) / (f.c * x + f.d);
        if constexpr (std::is_same_v<T, PolyForm>) return poly_eval(f.coeff, x);
      },
      form);
}

double Branch::deriv(double x) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineForm>) return f.a;
        if constexpr (std::is_same_v<T, MoebiusForm>) {
          double q = f.c * x + f.d;
          return (f.a * f.d - f.b * f.c) / (q * q);
        }
        if constexpr (std::is_same_v<T, PolyForm>)
          return poly_eval(poly_deriv(f.coeff), x);
      },
      form);
}

double Branch::second(double x) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineForm>) return 0.0;
        if constexpr (std::is_same_v<T, MoebiusForm>) {
          double q = f.c * x + f.d;
          return -2.0 * f.c * (f.a * f.d - f.b * f.c) / (q * q * q);
        }
        if constexpr (std::is_same_v<T, PolyForm>)
          return poly_eval(poly_deriv(poly_deriv(f.coeff)), x);
      },
      form);
}

double Branch::invert(double y) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AffineForm>) return (y - f.b) / f.a;
        if constexpr (std::is_same_v<T, MoebiusForm>)
          return (f.d * y - f.b) / (f.a - f.c * y);
        if constexpr (std::is_same_v<T, PolyForm>) {
          // Monotone on the domain: bisection then Newton polish.
          double a = lo, b = hi;
          double fa = poly_eval(f.coeff, a) - y;
          for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
            double m = 0.5 * (a + b);
            double fm = poly_eval(f.coeff, m) - y;
            if ((fa <= 0) == (fm <= 0)) {
              a = m;
              fa = fm;
            } else {
              b = m;
            }
          }
          double x = 0.5 * (a + b);
          for (int it = 0; it < 3; ++it) {
            double d = deriv(x);
            if (d != 0) x -= (eval(x) - y) / d;
          }
          return std::clamp(x, lo, hi);
        }
      },
      form);
}

bool Branch::increasing() const { return deriv(0.5 * (lo + hi)) > 0; }

double Branch::image_lo() const { return std::min(eval(lo), eval(hi)); }
double Branch::image_hi() const { return std::max(eval(lo), eval(hi)); }

bool Branch::image_contains(double y) const {
  // The domain is half-open but the image is treated as closed: covering is
  // only meaningful up to measure zero.
  const double eps = 1e-12;
  return y >= image_lo() - eps && y <= image_hi() + eps;
}

DerivativeBounds Branch::derivative_bounds() const {
  DerivativeBounds b;
  if (std::holds_alternative<AffineForm>(form)) {
    double a = std::abs(std::get<AffineForm>(form).a);
    b.min_abs_slope = b.max_abs_slope = a;
    b.max_second = 0.0;
    b.exact = true;
    return b;
  }
  if (std::holds_alternative<MoebiusForm>(form)) {
    // |T'| and |T''| are monotone in x, so endpoint values are sharp.
    double d1 = std::abs(deriv(lo)), d2 = std::abs(deriv(hi));
    b.min_abs_slope = std::min(d1, d2);
    b.max_abs_slope = std::max(d1, d2);
    b.max_second = std::max(std::abs(second(lo)), std::abs(second(hi)));
    b.exact = true;
    return b;
  }
  // Dense sampling for polynomial branches.
  const int K = 2048;
  double mn = std::abs(deriv(lo)), mx = mn, s2 = std::abs(second(lo));
  for (int i = 1; i <= K; ++i) {
    double x = lo + (hi - lo) * i / K;
    double d = std::abs(deriv(x));
    mn = std::min(mn, d);
    mx = std::max(mx, d);
    s2 = std::max(s2, std::abs(second(x)));
  }
  b.min_abs_slope = mn;
  b.max_abs_slope = mx;
  b.max_second = s2;
  b.exact = false;
  return b;
}

bool Branch::dyadic_affine() const {
  const auto* f = std::get_if<AffineForm>(&form);
  if (!f) return false;
  double a = std::abs(f->a);
  int e;
  double m = std::frexp(a, &e);
  if (m != 0.5) return false;  // |slope| must be a power of two
  auto dyadic = [](double x) {
    double s = x * 4503599627370496.0;  // 2^52
    return s == std::floor(s);
  };
  return dyadic(f->b) && dyadic(lo) && dyadic(hi);
}

const Branch& IntervalStage::branch_at(double x) const {
  for (const Branch& b : branches)
    if (x >= b.lo && x < b.hi) return b;
  if (x >= branches.back().hi - 1e-15) return branches.back();
  throw DomainError("point outside all branch domains");
}

bool stage_is_sft(const Stage& s) { return std::holds_alternative<SftStage>(s); }

const IntervalStage& as_interval(const Stage& s) {
  if (const auto* p = std::get_if<IntervalStage>(&s)) return *p;
  throw DomainError("expected an interval stage");
}

const SftStage& as_sft(const Stage& s) {
  if (const auto* p = std::get_if<SftStage>(&s)) return *p;
  throw DomainError("expected an SFT stage");
}

int schedule_index(const Schedule& s, int family_size, int j) {
  if (family_size <= 0) throw DomainError("empty map family");
  if (const auto* p = std::get_if<PeriodicSchedule>(&s)) {
    int P = static_cast<int>(p->order.size());
    if (P == 0) throw DomainError("periodic schedule with empty order");
    int r = j % P;
    if (r < 0) r += P;
    return p->order[r];
  }
  if (const auto* e = std::get_if<ExplicitSchedule>(&s)) {
    if (j < 0 || j >= static_cast<int>(e->indices.size()))
      throw DomainError("explicit schedule index out of range: j=" + std::to_string(j));
    return e->indices[j];
  }
  const auto& q = std::get<SeededSchedule>(s);
  // Counter-based draw: stateless in j, valid for negative times as well.
  uint64_t u = mix64(q.seed ^ mix64(static_cast<uint64_t>(static_cast<int64_t>(j)) ^
                                    0xa5a5a5a5a5a5a5a5ull));
  return static_cast<int>(u % static_cast<uint64_t>(family_size));
}

bool schedule_extendable(const Schedule& s) {
  return !std::holds_alternative<ExplicitSchedule>(s);
}

double TrigObservable::eval(double x) const {
  double s = a0;
  for (size_t k = 0; k < cos_coeff.size(); ++k)
    if (cos_coeff[k] != 0.0) s += cos_coeff[k] * std::cos(kTwoPi * (k + 1) * x);
  for (size_t k = 0; k < sin_coeff.size(); ++k)
    if (sin_coeff[k] != 0.0) s += sin_coeff[k] * std::sin(kTwoPi * (k + 1) * x);
  return s;
}

double TrigObservable::deriv(double x) const {
  double s = 0;
  for (size_t k = 0; k < cos_coeff.size(); ++k)
    if (cos_coeff[k] != 0.0)
      s -= cos_coeff[k] * kTwoPi * (k + 1) * std::sin(kTwoPi * (k + 1) * x);
  for (size_t k = 0; k < sin_coeff.size(); ++k)
    if (sin_coeff[k] != 0.0)
      s += sin_coeff[k] * kTwoPi * (k + 1) * std::cos(kTwoPi * (k + 1) * x);
  return s;
}

MapSequence::MapSequence(std::vector<Stage> family, Schedule schedule,
                         std::vector<Observable> obs_family, Schedule obs_schedule,
                         int mixing_horizon)
    : family_(std::move(family)),
      schedule_(std::move(schedule)),
      obs_family_(std::move(obs_family)),
      obs_schedule_(std::move(obs_schedule)),
      mixing_horizon_(mixing_horizon) {
  validate();
}

const Stage& MapSequence::stage_at(int j) const {
  if (j < 0) throw DomainError("stage_at: negative time (use stage_at_extended)");
  return family_[schedule_index(schedule_, static_cast<int>(family_.size()), j)];
}

const Stage& MapSequence::stage_at_extended(int j) const {
  if (j >= 0) return stage_at(j);
  if (!extendable())
    throw DomainError("explicit schedules do not extend to negative times");
  return family_[schedule_index(schedule_, static_cast<int>(family_.size()), j)];
}

std::optional<int> MapSequence::schedule_length() const {
  if (const auto* e = std::get_if<ExplicitSchedule>(&schedule_))
    return static_cast<int>(e->indices.size());
  return std::nullopt;
}

const Observable& MapSequence::observable_at(int j) const {
  if (obs_family_.empty()) throw DomainError("no observables configured");
  if (obs_family_.size() == 1) return obs_family_[0];
  return obs_family_[schedule_index(obs_schedule_, static_cast<int>(obs_family_.size()),
                                    j)];
}

int MapSequence::family_index_at(int j) const {
  return schedule_index(schedule_, static_cast<int>(family_.size()), j);
}

bool MapSequence::is_sft() const {
  if (family_.empty()) throw DomainError("empty map family");
  return stage_is_sft(family_[0]);
}

void MapSequence::validate() const {
  if (family_.empty()) throw DomainError("empty map family");
  bool sft = stage_is_sft(family_[0]);
  for (const Stage& s : family_) {
    if (stage_is_sft(s) != sft)
      throw DomainError("family mixes interval and SFT stages");
    if (sft) {
      const SftStage& st = as_sft(s);
      for (int a = 0; a < st.d_in(); ++a) {
        if (st.adjacency.row(a).sum() < 0.5)
          throw DomainError("adjacency row without outgoing edge");
      }
      for (int b = 0; b < st.d_out(); ++b) {
        if (st.adjacency.col(b).sum() < 0.5)
          throw DomainError("adjacency column without incoming edge");
      }
    } else {
      const IntervalStage& st = as_interval(s);
      if (st.branches.empty()) throw DomainError("interval stage with no branches");
      double edge = 0.0;
      for (const Branch& b : st.branches) {
        if (!(b.hi > b.lo)) throw DomainError("branch with empty domain");
        if (std::abs(b.lo - edge) > 1e-12)
          throw DomainError("branch domains must tile [0,1)");
        edge = b.hi;
      }
      if (std::abs(edge - 1.0) > 1e-12)
        throw DomainError("branch domains must cover [0,1)");
    }
  }
  if (sft) {
    // Composability: alphabet sizes must chain along every consecutive pair
    // that the schedule can produce. With a common alphabet this is trivial;
    // check all pairs in the family.
    for (const Stage& s : family_)
      for (const Stage& t : family_)
        if (as_sft(s).d_out() != as_sft(t).d_in())
          throw DomainError("SFT stages with incompatible alphabets");
  }
}

double apply_map(const IntervalStage& stage, double x) {
  if (x < 0.0 || x > 1.0) throw DomainError("apply_map: point outside [0,1]");
  if (x >= 1.0) x = std::nextafter(1.0, 0.0);
  const Branch& b = stage.branch_at(x);
  double y = b.eval(x);
  // Guard rounding at branch images; the dynamics lives in [0,1).
  if (y < 0.0) y = 0.0;
  if (y >= 1.0) y = std::nextafter(1.0, 0.0);
  return y;
}

std::vector<int> apply_map(const SftStage&, std::span<const int> word) {
  if (word.empty()) throw DomainError("apply_map: empty word");
  return std::vector<int>(word.begin() + 1, word.end());
}

std::vector<std::pair<double, double>> inverse_branches(const IntervalStage& stage,
                                                        double x) {
  std::vector<std::pair<double, double>> out;
  for (const Branch& b : stage.branches) {
    if (!b.image_contains(x)) continue;
    double y = b.invert(x);
    y = std::clamp(y, b.lo, b.hi);
    out.emplace_back(y, std::abs(b.deriv(y)));
  }
  return out;
}

ExpansionReport verify_expansion(const IntervalStage& stage) {
  ExpansionReport r;
  r.min_derivative = std::numeric_limits<double>::infinity();
  r.min_branch_length = std::numeric_limits<double>::infinity();
  for (const Branch& b : stage.branches) {
    DerivativeBounds db = b.derivative_bounds();
    r.min_derivative = std::min(r.min_derivative, db.min_abs_slope);
    r.max_second_derivative = std::max(r.max_second_derivative, db.max_second);
    r.min_branch_length = std::min(r.min_branch_length, b.hi - b.lo);
  }
  r.pass = r.min_derivative > 1.0 && r.min_branch_length > 0.0 &&
           std::isfinite(r.max_second_derivative);
  return r;
}

namespace {

// Union of intervals, kept sorted and merged.
struct IntervalSet {
  std::vector<std::pair<double, double>> parts;
  void add(double lo, double hi) {
    if (hi <= lo) return;
    parts.emplace_back(lo, hi);
  }
  void normalize() {
    std::sort(parts.begin(), parts.end());
    std::vector<std::pair<double, double>> merged;
    for (auto& p : parts) {
      if (!merged.empty() && p.first <= merged.back().second + 1e-12)
        merged.back().second = std::max(merged.back().second, p.second);
      else
        merged.push_back(p);
    }
    parts = std::move(merged);
  }
  double total() const {
    double s = 0;
    for (auto& p : parts) s += p.second - p.first;
    return s;
  }
};

IntervalSet push_forward(const IntervalStage& stage, const IntervalSet& in) {
  IntervalSet out;
  for (const auto& [lo, hi] : in.parts) {
    for (const Branch& b : stage.branches) {
      double a = std::max(lo, b.lo), c = std::min(hi, b.hi);
      if (c <= a) continue;
      double ya = b.eval(a), yc = b.eval(c);
      out.add(std::min(ya, yc), std::max(ya, yc));
    }
  }
  out.normalize();
  return out;
}

}  // namespace

CoveringResult verify_covering(const MapSequence& seq, int j, const Region& region,
                               int horizon) {
  if (horizon < 1) throw DomainError("verify_covering: horizon must be >= 1");
  CoveringResult res;
  if (const auto* ir = std::get_if<IntervalRegion>(&region)) {
    IntervalSet cur;
    cur.add(ir->lo, ir->hi);
    cur.normalize();
    if (cur.parts.empty()) throw DomainError("verify_covering: empty region");
    for (int n = 1; n <= horizon; ++n) {
      cur = push_forward(as_interval(seq.stage_at(j + n - 1)), cur);
      if (cur.total() >= 1.0 - 1e-9) {
        res.covered = true;
        res.n = n;
        res.final_intervals = cur.parts;
        return res;
      }
    }
    res.final_intervals = cur.parts;
    return res;
  }
  const auto& sr = std::get<SymbolRegion>(region);
  if (sr.symbols.empty()) throw DomainError("verify_covering: empty symbol region");
  std::vector<int> cur = sr.symbols;
  std::sort(cur.begin(), cur.end());
  for (int n = 1; n <= horizon; ++n) {
    const SftStage& st = as_sft(seq.stage_at(j + n - 1));
    std::vector<char> next(st.d_out(), 0);
    for (int a : cur)
      for (int b = 0; b < st.d_out(); ++b)
        if (st.allowed(a, b)) next[b] = 1;
    cur.clear();
    for (int b = 0; b < st.d_out(); ++b)
      if (next[b]) cur.push_back(b);
    if (static_cast<int>(cur.size()) == st.d_out()) {
      res.covered = true;
      res.n = n;
      res.final_symbols = cur;
      return res;
    }
  }
  res.final_symbols = cur;
  return res;
}

// ---------------------------------------------------------------------------
// Bundled stages.

IntervalStage make_doubling() {
  IntervalStage s;
  s.name = "doubling";
  s.branches = {{0.0, 0.5, AffineForm{2.0, 0.0}}, {0.5, 1.0, AffineForm{2.0, -1.0}}};
  return s;
}

IntervalStage make_tent() {
  IntervalStage s;
  s.name = "tent";
  s.branches = {{0.0, 0.5, AffineForm{2.0, 0.0}}, {0.5, 1.0, AffineForm{-2.0, 2.0}}};
  return s;
}

IntervalStage make_w_markov() {
  IntervalStage s;
  s.name = "w_markov";
  s.branches = {{0.0, 1.0 / 3.0, AffineForm{3.0, 0.0}},
                {1.0 / 3.0, 1.0, AffineForm{1.5, -0.5}}};
  return s;
}

IntervalStage make_triple() {
  IntervalStage s;
  s.name = "triple";
  s.branches = {{0.0, 1.0 / 3.0, AffineForm{3.0, 0.0}},
                {1.0 / 3.0, 2.0 / 3.0, AffineForm{3.0, -1.0}},
                {2.0 / 3.0, 1.0, AffineForm{3.0, -2.0}}};
  return s;
}

IntervalStage make_moebius_pair() {
  // Moebius branch [0,1/2) -> [0,1) with slope in [1.6, 2.5], then an affine
  // branch; the invariant density is genuinely non-constant.
  IntervalStage s;
  s.name = "moebius_pair";
  s.branches = {{0.0, 0.5, MoebiusForm{2.5, 0.0, 0.5, 1.0}},
                {0.5, 1.0, AffineForm{2.0, -1.0}}};
  return s;
}

SftStage make_full_shift(int symbols, double log_weight) {
  SftStage s;
  s.name = "full" + std::to_string(symbols);
  s.adjacency = Eigen::MatrixXd::Ones(symbols, symbols);
  s.potential = Eigen::MatrixXd::Constant(symbols, symbols, log_weight);
  return s;
}

SftStage make_golden_mean() {
  SftStage s;
  s.name = "golden_mean";
  s.adjacency = Eigen::MatrixXd::Ones(2, 2);
  s.adjacency(1, 1) = 0.0;
  s.potential = Eigen::MatrixXd::Zero(2, 2);
  return s;
}

SftStage make_sticky_shift(int symbols, double beta) {
  SftStage s;
  s.name = "sticky" + std::to_string(symbols);
  s.adjacency = Eigen::MatrixXd::Ones(symbols, symbols);
  s.potential = Eigen::MatrixXd::Zero(symbols, symbols);
  for (int a = 0; a < symbols; ++a) s.potential(a, a) = beta;
  return s;
}

}  // namespace seqlim
