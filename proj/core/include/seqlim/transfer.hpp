#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "seqlim/field.hpp"
#include "seqlim/maps.hpp"
#include "seqlim/rng.hpp"

namespace seqlim {

enum class OpKind { Raw, Normalized, PulledBack, Twisted };

/// One time step of transfer-operator action in a discrete basis.
///
/// Interval stages are collocated on the grid: row i of the sparse kernel
/// holds the interpolation weights of sum_branches g(y_b(x_i)) / |T'(y_b)|.
/// SFT stages act on symbol functions through the weighted adjacency matrix
/// base(b,a) = A(a,b) exp(phi(a,b)).
///
/// Optional diagonal factors `pre` (applied to the argument) and `post`
/// (applied to the image) express the normalized, pulled-back and twisted
/// variants without touching the kernel.
class TransferOp {
 public:
  OpKind kind = OpKind::Raw;
  int time = 0;        // acts B_time -> B_{time+1}
  Complex twist = 0.0;  // z for twisted kind

  // interval part (CSR)
  int in_dim = 0, out_dim = 0;
  std::vector<int> row_ptr, col;
  std::vector<double> wgt;

  // SFT part
  Eigen::MatrixXd base;  // out_dim x in_dim
  std::shared_ptr<const SftStage> stage;

  bool is_sft_op = false;
  Eigen::VectorXcd pre, post;  // empty when absent

  FieldFunction apply(const FieldFunction& g) const;
  Eigen::VectorXcd apply_vec(const Eigen::VectorXcd& g) const;
  /// Adjoint on plain coefficient functionals: nu(g) = sum_i nu_i g_i.
  Eigen::VectorXcd adjoint_apply(const Eigen::VectorXcd& nu) const;
  /// Word-table action for SFT stages; `out_basis` enumerates the admissible
  /// output words of the same depth.
  FieldFunction apply_word(const FieldFunction& g, WordBasisPtr out_basis) const;

  Eigen::MatrixXcd to_matrix() const;
  /// Max absolute row sum of the effective kernel: the exact induced
  /// sup-norm of the operator.
  double sup_operator_norm() const;

  TransferOp with_pre(const Eigen::VectorXcd& m, OpKind k, Complex z = 0.0) const;
  TransferOp with_post(const Eigen::VectorXcd& m, OpKind k) const;

  /// CSV dump: header row `kind,j,re_z,im_z,rows,cols` then dense row-major.
  std::string to_csv() const;
};

/// Collocation assembly of the raw interval operator at grid size G.
TransferOp assemble_interval(const IntervalStage& stage, int grid, int time);
/// Weighted-adjacency assembly of the raw SFT operator.
TransferOp assemble_sft(const SftStage& stage, int time);

/// Composition L_j^n as an ordered chain (applied left to right).
struct OpChain {
  std::vector<TransferOp> ops;  // ops[k] acts at time j+k
  FieldFunction apply(const FieldFunction& g) const;
  Eigen::MatrixXcd to_matrix() const;  // only for SFT or small grids
  int first_time() const { return ops.empty() ? 0 : ops.front().time; }
  int length() const { return static_cast<int>(ops.size()); }
};
OpChain compose(std::vector<TransferOp> ops);

struct LyReport {
  double rho_hat = 0.0;
  double k_hat = 0.0;
  bool pass = false;
};
/// Fit the smallest Lasota-Yorke pair over sampled BV functions:
/// variation(L^N h) <= rho variation(h) + K |h|_1.
class System;  // forward declared; defined in system.hpp

struct ScReport {
  int n_a = 0;
  double alpha_a = 0.0;
  bool pass = false;
  int worst_j = 0;
};

struct MinScReport {
  double delta0 = 0.0;
  double delta2 = 0.0;
  double decay_rate = 0.0;    // fitted rate of mean-zero contraction
  double decay_prefactor = 0.0;
  int n_a = 0;
  double alpha_a = 0.0;
  bool applicable = false;
};

}  // namespace seqlim
