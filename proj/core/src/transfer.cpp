#include "seqlim/transfer.hpp"

#include <cmath>
#include <sstream>

namespace seqlim {

namespace {

inline void add_entry(std::vector<int>& col, std::vector<double>& wgt, int c, double w) {
  col.push_back(c);
  wgt.push_back(w);
}

}  // namespace

TransferOp assemble_interval(const IntervalStage& stage, int grid, int time) {
  TransferOp op;
  op.kind = OpKind::Raw;
  op.time = time;
  op.is_sft_op = false;
  op.in_dim = op.out_dim = grid;
  op.row_ptr.reserve(grid + 1);
  op.row_ptr.push_back(0);
  const double scale = grid - 1;
  for (int i = 0; i < grid; ++i) {
    double x = static_cast<double>(i) / scale;
    for (const Branch& b : stage.branches) {
      if (!b.image_contains(x)) continue;
      double y = std::clamp(b.invert(x), b.lo, b.hi);
      double w = 1.0 / std::abs(b.deriv(y));
      double t = y * scale;
      int i0 = static_cast<int>(t);
      if (i0 >= grid - 1) i0 = grid - 2;
      double frac = t - i0;
      if (frac < 1e-14) {
        add_entry(op.col, op.wgt, i0, w);
      } else if (frac > 1.0 - 1e-14) {
        add_entry(op.col, op.wgt, i0 + 1, w);
      } else {
        add_entry(op.col, op.wgt, i0, w * (1.0 - frac));
        add_entry(op.col, op.wgt, i0 + 1, w * frac);
      }
    }
    op.row_ptr.push_back(static_cast<int>(op.col.size()));
  }
  return op;
}

TransferOp assemble_sft(const SftStage& stage, int time) {
  TransferOp op;
  op.kind = OpKind::Raw;
  op.time = time;
  op.is_sft_op = true;
  op.in_dim = stage.d_in();
  op.out_dim = stage.d_out();
  op.stage = std::make_shared<SftStage>(stage);
  op.base = Eigen::MatrixXd::Zero(op.out_dim, op.in_dim);
  for (int a = 0; a < op.in_dim; ++a)
    for (int b = 0; b < op.out_dim; ++b)
      if (stage.allowed(a, b)) op.base(b, a) = std::exp(stage.potential(a, b));
  return op;
}

Eigen::VectorXcd TransferOp::apply_vec(const Eigen::VectorXcd& g) const {
  if (g.size() != in_dim) throw DomainError("transfer apply: dimension mismatch");
  Eigen::VectorXcd arg = pre.size() ? pre.cwiseProduct(g) : g;
  Eigen::VectorXcd out(out_dim);
  if (is_sft_op) {
    out = base * arg;
  } else {
    for (int i = 0; i < out_dim; ++i) {
      Complex s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += wgt[k] * arg[col[k]];
      out[i] = s;
    }
  }
  if (post.size()) out = post.cwiseProduct(out);
  return out;
}

FieldFunction TransferOp::apply(const FieldFunction& g) const {
  FieldFunction out = g;
  if (g.size() != in_dim) throw DomainError("transfer apply: basis mismatch");
  out.values() = apply_vec(g.values());
  // operators can be shared across equal schedule positions, so the output
  // time flows from the argument
  out.set_time(g.time() + 1);
  return out;
}

Eigen::VectorXcd TransferOp::adjoint_apply(const Eigen::VectorXcd& nu) const {
  if (nu.size() != out_dim) throw DomainError("adjoint apply: dimension mismatch");
  Eigen::VectorXcd arg = post.size() ? post.cwiseProduct(nu) : nu;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(in_dim);
  if (is_sft_op) {
    out = base.transpose() * arg;
  } else {
    for (int i = 0; i < out_dim; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out[col[k]] += wgt[k] * arg[i];
  }
  if (pre.size()) out = pre.cwiseProduct(out);
  return out;
}

FieldFunction TransferOp::apply_word(const FieldFunction& g, WordBasisPtr out_basis) const {
  if (!is_sft_op) throw DomainError("apply_word: SFT operators only");
  if (g.kind() != BasisKind::Word) throw DomainError("apply_word: word basis input");
  const WordBasis& in_b = *g.word_basis();
  const WordBasis& out_b = *out_basis;
  if (in_b.depth != out_b.depth) throw DomainError("apply_word: depth mismatch");
  int m = in_b.depth;
  FieldFunction out = FieldFunction::word_zero(out_basis, time + 1);
  std::vector<int> w(m);
  for (int q = 0; q < out_b.size(); ++q) {
    const std::vector<int>& x = out_b.words[q];
    Complex s = 0.0;
    for (int a = 0; a < in_dim; ++a) {
      if (!stage->allowed(a, x[0])) continue;
      w[0] = a;
      for (int t = 1; t < m; ++t) w[t] = x[t - 1];
      int idx = in_b.index_of(w);
      if (idx < 0) continue;
      Complex k = base(x[0], a);
      if (pre.size()) k *= pre[a];
      if (post.size()) k *= post[x[0]];
      s += k * g[idx];
    }
    out[q] = s;
  }
  return out;
}

Eigen::MatrixXcd TransferOp::to_matrix() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(out_dim, in_dim);
  if (is_sft_op) {
    m = base.cast<Complex>();
  } else {
    for (int i = 0; i < out_dim; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) m(i, col[k]) += wgt[k];
  }
  if (pre.size()) m = m * pre.asDiagonal();
  if (post.size()) m = post.asDiagonal() * m;
  return m;
}

double TransferOp::sup_operator_norm() const {
  double best = 0.0;
  if (is_sft_op) {
    for (int i = 0; i < out_dim; ++i) {
      double s = 0.0;
      for (int a = 0; a < in_dim; ++a) {
        double w = base(i, a);
        if (w == 0.0) continue;
        double m = w;
        if (pre.size()) m *= std::abs(pre[a]);
        s += m;
      }
      if (post.size()) s *= std::abs(post[i]);
      best = std::max(best, s);
    }
    return best;
  }
  for (int i = 0; i < out_dim; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      double m = wgt[k];
      if (pre.size()) m *= std::abs(pre[col[k]]);
      s += m;
    }
    if (post.size()) s *= std::abs(post[i]);
    best = std::max(best, s);
  }
  return best;
}

TransferOp TransferOp::with_pre(const Eigen::VectorXcd& m, OpKind k, Complex z) const {
  TransferOp op = *this;
  op.kind = k;
  op.twist = z;
  op.pre = pre.size() ? Eigen::VectorXcd(pre.cwiseProduct(m)) : m;
  return op;
}

TransferOp TransferOp::with_post(const Eigen::VectorXcd& m, OpKind k) const {
  TransferOp op = *this;
  op.kind = k;
  op.post = post.size() ? Eigen::VectorXcd(post.cwiseProduct(m)) : m;
  return op;
}

std::string TransferOp::to_csv() const {
  std::ostringstream ss;
  const char* kind_name = kind == OpKind::Raw          ? "raw"
                          : kind == OpKind::Normalized  ? "normalized"
                          : kind == OpKind::PulledBack ? "pulled_back"
                                                        : "twisted";
  ss << "kind,j,re_z,im_z,rows,cols\n"
     << kind_name << ',' << time << ',' << twist.real() << ',' << twist.imag() << ','
     << out_dim << ',' << in_dim << '\n';
  Eigen::MatrixXcd m = to_matrix();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) ss << ',';
      ss << m(i, j).real();
      if (m(i, j).imag() != 0.0) ss << '+' << m(i, j).imag() << 'i';
    }
    ss << '\n';
  }
  return ss.str();
}

FieldFunction OpChain::apply(const FieldFunction& g) const {
  FieldFunction cur = g;
  for (const TransferOp& op : ops) cur = op.apply(cur);
  return cur;
}

Eigen::MatrixXcd OpChain::to_matrix() const {
  if (ops.empty()) throw DomainError("empty operator chain");
  Eigen::MatrixXcd m = ops.front().to_matrix();
  for (size_t k = 1; k < ops.size(); ++k) m = ops[k].to_matrix() * m;
  return m;
}

OpChain compose(std::vector<TransferOp> ops) {
  if (ops.empty()) throw DomainError("compose: empty operator list");
  for (size_t k = 1; k < ops.size(); ++k) {
    if (ops[k].time != ops[k - 1].time + 1)
      throw DomainError("compose: non-consecutive time indices");
    if (ops[k].in_dim != ops[k - 1].out_dim)
      throw DomainError("compose: incompatible bases");
  }
  OpChain chain;
  chain.ops = std::move(ops);
  return chain;
}

}  // namespace seqlim
