#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqlim/common.hpp"

namespace seqlim {

enum class BasisKind { Grid, Word };

/// Admissible-word basis for symbolic systems. Words are the allowed words
/// of fixed depth starting at a given time step; `weights` carries the
/// cylinder masses used for L^1 quantities (a probability vector).
struct WordBasis {
  int depth = 1;
  std::vector<std::vector<int>> words;  // lexicographically sorted
  Eigen::VectorXd weights;              // one weight per word, sums to 1
  double holder_alpha = 1.0;

  int size() const { return static_cast<int>(words.size()); }
  int index_of(std::span<const int> w) const;  // -1 if not admissible

  static uint64_t pack(std::span<const int> w);

 private:
  mutable std::unordered_map<uint64_t, int> index_;
  mutable bool index_built_ = false;
  void build_index() const;
};

using WordBasisPtr = std::shared_ptr<const WordBasis>;

/// Discrete member of one of the function spaces: values on a uniform grid
/// over [0,1] (piecewise-linear interpolation between nodes) or a table on
/// the admissible words of a word basis.
class FieldFunction {
 public:
  FieldFunction() = default;

  static FieldFunction grid_zero(int size, int time = 0);
  static FieldFunction grid_constant(int size, Complex value, int time = 0);
  static FieldFunction grid_sample(int size, const std::function<double(double)>& f,
                                   int time = 0);
  static FieldFunction word_zero(WordBasisPtr basis, int time = 0);
  static FieldFunction word_constant(WordBasisPtr basis, Complex value, int time = 0);

  BasisKind kind() const { return kind_; }
  bool is_grid() const { return kind_ == BasisKind::Grid; }
  int size() const { return static_cast<int>(v_.size()); }
  int time() const { return time_; }
  void set_time(int t) { time_ = t; }
  int grid_size() const { return grid_size_; }
  const WordBasisPtr& word_basis() const { return wb_; }

  Eigen::VectorXcd& values() { return v_; }
  const Eigen::VectorXcd& values() const { return v_; }
  Complex& operator[](int i) { return v_[i]; }
  Complex operator[](int i) const { return v_[i]; }

  /// Node abscissa of grid index i.
  double node(int i) const { return static_cast<double>(i) / (grid_size_ - 1); }
  /// Piecewise-linear evaluation at x in [0,1] (grid basis only).
  Complex interp(double x) const;
  double interp_real(double x) const;

  bool same_basis(const FieldFunction& o) const;
  bool is_real(double tol = 1e-12) const;
  FieldFunction real_part() const;

  FieldFunction& operator+=(const FieldFunction& o);
  FieldFunction& operator-=(const FieldFunction& o);
  FieldFunction& operator*=(Complex c);
  friend FieldFunction operator+(FieldFunction a, const FieldFunction& b) { return a += b; }
  friend FieldFunction operator-(FieldFunction a, const FieldFunction& b) { return a -= b; }
  friend FieldFunction operator*(Complex c, FieldFunction a) { return a *= c; }

  FieldFunction pointwise(const FieldFunction& o) const;  // entrywise product
  FieldFunction map(const std::function<Complex(Complex)>& fn) const;

  /// Quadrature weights of the basis: trapezoid weights for the grid,
  /// cylinder masses for words. They sum to 1.
  Eigen::VectorXd quadrature_weights() const;

  /// CSV dump (index,re,im), debugging format.
  std::string to_csv() const;

 private:
  BasisKind kind_ = BasisKind::Grid;
  int time_ = 0;
  int grid_size_ = 0;
  WordBasisPtr wb_;
  Eigen::VectorXcd v_;
};

struct NormReport {
  double l1 = 0.0;
  double variation = 0.0;
  double sup = 0.0;
  double bv = 0.0;  // l1 + variation
};

/// Total variation on the grid basis; Hoelder-constant surrogate
/// max |h(w)-h(w')| * 2^(alpha k) over word pairs first differing at k.
double variation(const FieldFunction& h);
double l1_norm(const FieldFunction& h);
double sup_norm(const FieldFunction& h);
Complex mean(const FieldFunction& h);       // basis measure of h
NormReport bv_norm(const FieldFunction& h);
double bv(const FieldFunction& h);          // shorthand for bv_norm(h).bv

struct ConeReport {
  bool member = false;
  double ratio = 0.0;  // variation / mean, +inf when mean == 0 and variation > 0
};

/// Membership in the cone {h >= 0, variation(h) <= a * mean(h)}.
ConeReport cone_check(const FieldFunction& h, double a);

/// Projective metric of the pointwise-positive cone:
/// log(max_i f_i/g_i / min_i f_i/g_i). Zero iff f = c g.
double hilbert_metric(const FieldFunction& f, const FieldFunction& g);

struct SplitBv {
  FieldFunction positive;  // g + C0
  FieldFunction shift;     // the constant C0
  double c0 = 0.0;
  double r0 = 0.0;  // (|g1| + |g2|) / |g| in BV norm
};

/// Write a real function as a difference of two cone members,
/// g = (g + C0) - C0 with C0 = sup|g| + (1+a)/a * |g|_BV.
SplitBv split_bv(const FieldFunction& g, double a);

}  // namespace seqlim
