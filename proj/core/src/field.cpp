#include "seqlim/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace seqlim {

uint64_t WordBasis::pack(std::span<const int> w) {
  // 8 bits per symbol caps alphabets at 256 and depth at 8; plenty here.
  uint64_t key = 1;
  for (int s : w) key = (key << 8) | static_cast<uint64_t>(s & 0xff);
  return key;
}

void WordBasis::build_index() const {
  index_.reserve(words.size() * 2);
  for (size_t i = 0; i < words.size(); ++i)
    index_.emplace(pack(words[i]), static_cast<int>(i));
  index_built_ = true;
}

int WordBasis::index_of(std::span<const int> w) const {
  if (!index_built_) build_index();
  auto it = index_.find(pack(w));
  return it == index_.end() ? -1 : it->second;
}

FieldFunction FieldFunction::grid_zero(int size, int time) {
  if (size < 2) throw DomainError("grid basis needs at least 2 nodes");
  FieldFunction f;
  f.kind_ = BasisKind::Grid;
  f.grid_size_ = size;
  f.time_ = time;
  f.v_ = Eigen::VectorXcd::Zero(size);
  return f;
}

FieldFunction FieldFunction::grid_constant(int size, Complex value, int time) {
  FieldFunction f = grid_zero(size, time);
  f.v_.setConstant(value);
  return f;
}

FieldFunction FieldFunction::grid_sample(int size, const std::function<double(double)>& fn,
                                         int time) {
  FieldFunction f = grid_zero(size, time);
  for (int i = 0; i < size; ++i) f.v_[i] = fn(f.node(i));
  return f;
}

FieldFunction FieldFunction::word_zero(WordBasisPtr basis, int time) {
  if (!basis || basis->size() == 0) throw DomainError("empty word basis");
  FieldFunction f;
  f.kind_ = BasisKind::Word;
  f.wb_ = std::move(basis);
  f.time_ = time;
  f.v_ = Eigen::VectorXcd::Zero(f.wb_->size());
  return f;
}

FieldFunction FieldFunction::word_constant(WordBasisPtr basis, Complex value, int time) {
  FieldFunction f = word_zero(std::move(basis), time);
  f.v_.setConstant(value);
  return f;
}

Complex FieldFunction::interp(double x) const {
  if (!is_grid()) throw DomainError("interp: word basis");
  if (x <= 0.0) return v_[0];
  if (x >= 1.0) return v_[grid_size_ - 1];
  double t = x * (grid_size_ - 1);
  int i = static_cast<int>(t);
  if (i >= grid_size_ - 1) i = grid_size_ - 2;
  double w = t - i;
  return (1.0 - w) * v_[i] + w * v_[i + 1];
}

double FieldFunction::interp_real(double x) const { return interp(x).real(); }

bool FieldFunction::same_basis(const FieldFunction& o) const {
  if (kind_ != o.kind_) return false;
  if (is_grid()) return grid_size_ == o.grid_size_;
  return wb_ == o.wb_ || (wb_ && o.wb_ && wb_->words == o.wb_->words);
}

bool FieldFunction::is_real(double tol) const {
  for (int i = 0; i < v_.size(); ++i)
    if (std::abs(v_[i].imag()) > tol) return false;
  return true;
}

FieldFunction FieldFunction::real_part() const {
  FieldFunction f = *this;
  for (int i = 0; i < f.v_.size(); ++i) f.v_[i] = Complex(f.v_[i].real(), 0.0);
  return f;
}

FieldFunction& FieldFunction::operator+=(const FieldFunction& o) {
  if (!same_basis(o)) throw DomainError("basis mismatch in +");
  v_ += o.v_;
  return *this;
}

FieldFunction& FieldFunction::operator-=(const FieldFunction& o) {
  if (!same_basis(o)) throw DomainError("basis mismatch in -");
  v_ -= o.v_;
  return *this;
}

FieldFunction& FieldFunction::operator*=(Complex c) {
  v_ *= c;
  return *this;
}

FieldFunction FieldFunction::pointwise(const FieldFunction& o) const {
  if (!same_basis(o)) throw DomainError("basis mismatch in pointwise product");
  FieldFunction f = *this;
  f.v_ = v_.cwiseProduct(o.v_);
  return f;
}

FieldFunction FieldFunction::map(const std::function<Complex(Complex)>& fn) const {
  FieldFunction f = *this;
  for (int i = 0; i < f.v_.size(); ++i) f.v_[i] = fn(f.v_[i]);
  return f;
}

Eigen::VectorXd FieldFunction::quadrature_weights() const {
  if (is_grid()) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(grid_size_, 1.0 / (grid_size_ - 1));
    w[0] *= 0.5;
    w[grid_size_ - 1] *= 0.5;
    return w;
  }
  return wb_->weights;
}

std::string FieldFunction::to_csv() const {
  std::ostringstream ss;
  ss << "index,re,im\n";
  for (int i = 0; i < v_.size(); ++i)
    ss << i << ',' << v_[i].real() << ',' << v_[i].imag() << '\n';
  return ss.str();
}

double variation(const FieldFunction& h) {
  const auto& v = h.values();
  if (h.is_grid()) {
    double s = 0;
    for (int i = 0; i + 1 < v.size(); ++i) s += std::abs(v[i + 1] - v[i]);
    return s;
  }
  const WordBasis& wb = *h.word_basis();
  double alpha = wb.holder_alpha;
  double best = 0;
  int n = wb.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& wi = wb.words[i];
      const auto& wj = wb.words[j];
      int k = 0;
      while (k < wb.depth && wi[k] == wj[k]) ++k;
      double d = std::abs(v[i] - v[j]) * std::exp2(alpha * k);
      best = std::max(best, d);
    }
  }
  return best;
}

double l1_norm(const FieldFunction& h) {
  Eigen::VectorXd w = h.quadrature_weights();
  double s = 0;
  for (int i = 0; i < w.size(); ++i) s += w[i] * std::abs(h[i]);
  return s;
}

double sup_norm(const FieldFunction& h) {
  double s = 0;
  for (int i = 0; i < h.size(); ++i) s = std::max(s, std::abs(h[i]));
  return s;
}

Complex mean(const FieldFunction& h) {
  Eigen::VectorXd w = h.quadrature_weights();
  Complex s = 0;
  for (int i = 0; i < w.size(); ++i) s += w[i] * h[i];
  return s;
}

NormReport bv_norm(const FieldFunction& h) {
  NormReport r;
  r.l1 = l1_norm(h);
  r.variation = variation(h);
  r.sup = sup_norm(h);
  r.bv = r.l1 + r.variation;
  return r;
}

double bv(const FieldFunction& h) { return l1_norm(h) + variation(h); }

ConeReport cone_check(const FieldFunction& h, double a) {
  if (a <= 0) throw DomainError("cone_check: a must be positive");
  ConeReport r;
  bool nonneg = true;
  for (int i = 0; i < h.size(); ++i) {
    if (std::abs(h[i].imag()) > 1e-12 || h[i].real() < 0) {
      nonneg = false;
      break;
    }
  }
  double var = variation(h);
  double m = mean(h).real();
  r.ratio = (m > 0) ? var / m
                    : (var > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.member = nonneg && var <= a * m + 1e-15;
  if (m == 0 && var == 0) r.member = nonneg;
  return r;
}

double hilbert_metric(const FieldFunction& f, const FieldFunction& g) {
  if (!f.same_basis(g)) throw DomainError("hilbert_metric: basis mismatch");
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (int i = 0; i < f.size(); ++i) {
    double fi = f[i].real(), gi = g[i].real();
    if (fi <= 0 || gi <= 0 || std::abs(f[i].imag()) > 1e-14 ||
        std::abs(g[i].imag()) > 1e-14)
      throw DomainError("hilbert_metric: inputs must be strictly positive");
    double r = fi / gi;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return std::log(hi / lo);
}

SplitBv split_bv(const FieldFunction& g, double a) {
  if (a <= 0) throw DomainError("split_bv: a must exceed the variation of constants (0)");
  if (!g.is_real(1e-12)) throw DomainError("split_bv: real input required");
  NormReport nr = bv_norm(g);
  double c0 = nr.sup + ((1.0 + a) / a) * nr.bv;
  SplitBv out;
  out.c0 = c0;
  out.positive = g;
  for (int i = 0; i < out.positive.size(); ++i) out.positive[i] += c0;
  out.shift = g.is_grid()
                  ? FieldFunction::grid_constant(g.grid_size(), c0, g.time())
                  : FieldFunction::word_constant(g.word_basis(), c0, g.time());
  double denom = nr.bv;
  out.r0 = denom > 0 ? (bv(out.positive) + bv(out.shift)) / denom
                     : 0.0;
  return out;
}

}  // namespace seqlim
