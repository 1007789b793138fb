#include "aim/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aim::nn {

const Matrix& Var::value() const {
  if (!tape) throw std::logic_error("empty Var");
  return tape->value(*this);
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::logic_error("Var does not belong to this tape");
  }
}

Var Tape::constant(Matrix m) { return push(std::move(m), false, {}); }

Var Tape::parameter(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, bool needs_grad, Backward back) {
  Node n;
  n.own = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)].value();
}

const Matrix& Tape::grad(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)].grad;
}

void Tape::accumulate(Var v, const Matrix& g) { accumulate_expr(v, g); }

void Tape::record_pattern(const Matrix& pre) {
  for (Eigen::Index i = 0; i < pre.size(); ++i) pattern_.push_back(pre.data()[i] > 0 ? 1 : 0);
}

void Tape::backward(Var root) {
  check(root);
  if (value(root).size() != 1) throw std::logic_error("backward: root must be a scalar");
  backward(root, Matrix::Ones(1, 1));
}

void Tape::backward(Var root, const Matrix& seed) {
  check(root);
  if (nodes_.empty()) throw std::logic_error("backward without a recorded forward pass");
  const auto& rv = value(root);
  if (seed.rows() != rv.rows() || seed.cols() != rv.cols()) {
    throw std::logic_error("backward: seed shape mismatch");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(root, seed);
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.back) {
      // the callback may push into other nodes' grads; keep ours stable
      const Matrix g = n.grad;
      n.back(*this, g, n.value());
    }
    if (n.param) n.param->grad += n.grad;
  }
}

void Tape::clear() {
  nodes_.clear();
  pattern_.clear();
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

Tape& tape_of(Var a) {
  if (!a.tape) throw std::logic_error("op on empty Var");
  return *a.tape;
}

void check_index(const Index& idx, Eigen::Index bound, const char* op) {
  for (int i : idx) {
    if (i < 0 || i >= bound) throw std::out_of_range(std::string(op) + ": index out of range");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.push(std::move(out), ng, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    if (tp.needs_grad(a)) tp.accumulate_expr(a, g * tp.value(b).transpose());
    if (tp.needs_grad(b)) tp.accumulate_expr(b, tp.value(a).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& tp, const Matrix& g, const Matrix&) {
                  tp.accumulate(a, g);
                  tp.accumulate(b, g);
                });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& tp, const Matrix& g, const Matrix&) {
                  tp.accumulate(a, g);
                  tp.accumulate_expr(b, -g);
                });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& tp, const Matrix& g, const Matrix&) {
                  tp.accumulate_expr(a, g.cwiseProduct(tp.value(b)));
                  tp.accumulate_expr(b, g.cwiseProduct(tp.value(a)));
                });
}

Var scale(Var a, Scalar c) {
  Tape& t = tape_of(a);
  Matrix out = a.value() * c;
  return t.push(std::move(out), t.needs_grad(a),
                [a, c](Tape& tp, const Matrix& g, const Matrix&) { tp.accumulate_expr(a, g * c); });
}

Var add_row(Var x, Var bias) {
  Tape& t = tape_of(x);
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw std::invalid_argument("add_row: bias must be 1 x cols");
  }
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return t.push(std::move(out), t.needs_grad(x) || t.needs_grad(bias),
                [x, bias](Tape& tp, const Matrix& g, const Matrix&) {
                  tp.accumulate(x, g);
                  if (tp.needs_grad(bias)) tp.accumulate_expr(bias, g.colwise().sum());
                });
}

Var mul_rows(Var x, Var w) {
  Tape& t = tape_of(x);
  if (w.rows() != x.rows() || w.cols() != 1) {
    throw std::invalid_argument("mul_rows: weights must be rows x 1");
  }
  Matrix out = x.value().array().colwise() * w.value().col(0).array();
  return t.push(std::move(out), t.needs_grad(x) || t.needs_grad(w),
                [x, w](Tape& tp, const Matrix& g, const Matrix&) {
                  if (tp.needs_grad(x)) {
                    tp.accumulate_expr(x, (g.array().colwise() * tp.value(w).col(0).array()).matrix());
                  }
                  if (tp.needs_grad(w)) {
                    tp.accumulate_expr(w, g.cwiseProduct(tp.value(x)).rowwise().sum());
                  }
                });
}

Var relu(Var x) { return leaky_relu(x, 0); }

Var leaky_relu(Var x, Scalar slope) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  t.record_pattern(xv);
  Matrix out = xv.unaryExpr([slope](Scalar v) { return v > 0 ? v : slope * v; });
  return t.push(std::move(out), t.needs_grad(x), [x, slope](Tape& tp, const Matrix& g, const Matrix&) {
    const Matrix& in = tp.value(x);
    Matrix d = g;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(in.data()[i] > 0)) d.data()[i] *= slope;
    }
    tp.accumulate(x, d);
  });
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  Matrix out = x.value().array().tanh().matrix();
  return t.push(std::move(out), t.needs_grad(x), [x](Tape& tp, const Matrix& g, const Matrix& y) {
    tp.accumulate_expr(x, (g.array() * (1 - y.array().square())).matrix());
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a);
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  const auto ca = a.cols();
  const auto cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out << a.value(), b.value();
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b, ca, cb](Tape& tp, const Matrix& g, const Matrix&) {
                  if (tp.needs_grad(a)) tp.accumulate_expr(a, g.leftCols(ca));
                  if (tp.needs_grad(b)) tp.accumulate_expr(b, g.rightCols(cb));
                });
}

Var gather_rows(Var x, const Index& idx) {
  Tape& t = tape_of(x);
  check_index(idx, x.rows(), "gather_rows");
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), xv.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = xv.row(idx[k]);
  const auto n = xv.rows();
  return t.push(std::move(out), t.needs_grad(x),
                [x, idx, n](Tape& tp, const Matrix& g, const Matrix&) {
                  Matrix d = Matrix::Zero(n, g.cols());
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    d.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
                  }
                  tp.accumulate(x, d);
                });
}

Var scatter_add_rows(Var x, const Index& idx, int n) {
  Tape& t = tape_of(x);
  if (static_cast<Eigen::Index>(idx.size()) != x.rows()) {
    throw std::invalid_argument("scatter_add_rows: one index per row required");
  }
  check_index(idx, n, "scatter_add_rows");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(n, xv.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(idx[k]) += xv.row(static_cast<Eigen::Index>(k));
  return t.push(std::move(out), t.needs_grad(x), [x, idx](Tape& tp, const Matrix& g, const Matrix&) {
    Matrix d(static_cast<Eigen::Index>(idx.size()), g.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) d.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
    tp.accumulate(x, d);
  });
}

Var scatter_mean_rows(Var x, const Index& idx, int n) {
  Tape& t = tape_of(x);
  if (static_cast<Eigen::Index>(idx.size()) != x.rows()) {
    throw std::invalid_argument("scatter_mean_rows: one index per row required");
  }
  check_index(idx, n, "scatter_mean_rows");
  std::vector<Scalar> inv(static_cast<std::size_t>(n), 0);
  for (int i : idx) inv[static_cast<std::size_t>(i)] += 1;
  for (auto& c : inv) c = c > 0 ? 1 / c : 0;
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(n, xv.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(idx[k]) += xv.row(static_cast<Eigen::Index>(k)) * inv[static_cast<std::size_t>(idx[k])];
  }
  return t.push(std::move(out), t.needs_grad(x),
                [x, idx, inv](Tape& tp, const Matrix& g, const Matrix&) {
                  Matrix d(static_cast<Eigen::Index>(idx.size()), g.cols());
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    d.row(static_cast<Eigen::Index>(k)) =
                        g.row(idx[k]) * inv[static_cast<std::size_t>(idx[k])];
                  }
                  tp.accumulate(x, d);
                });
}

Var segment_softmax(Var x, const Index& seg, int n) {
  Tape& t = tape_of(x);
  if (x.cols() != 1 || static_cast<Eigen::Index>(seg.size()) != x.rows()) {
    throw std::invalid_argument("segment_softmax: expects a column with one segment per row");
  }
  check_index(seg, n, "segment_softmax");
  const Matrix& xv = x.value();
  std::vector<Scalar> peak(static_cast<std::size_t>(n), -std::numeric_limits<Scalar>::infinity());
  for (std::size_t k = 0; k < seg.size(); ++k) {
    auto& p = peak[static_cast<std::size_t>(seg[k])];
    p = std::max(p, xv(static_cast<Eigen::Index>(k), 0));
  }
  Matrix out(xv.rows(), 1);
  std::vector<Scalar> total(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < seg.size(); ++k) {
    const auto s = static_cast<std::size_t>(seg[k]);
    const auto r = static_cast<Eigen::Index>(k);
    out(r, 0) = std::exp(xv(r, 0) - peak[s]);
    total[s] += out(r, 0);
  }
  for (std::size_t k = 0; k < seg.size(); ++k) {
    out(static_cast<Eigen::Index>(k), 0) /= total[static_cast<std::size_t>(seg[k])];
  }
  return t.push(std::move(out), t.needs_grad(x),
                [x, seg, n](Tape& tp, const Matrix& g, const Matrix& y) {
                  // d x_k = y_k (g_k - sum_{l in seg} g_l y_l)
                  std::vector<Scalar> dot(static_cast<std::size_t>(n), 0);
                  for (std::size_t k = 0; k < seg.size(); ++k) {
                    const auto r = static_cast<Eigen::Index>(k);
                    dot[static_cast<std::size_t>(seg[k])] += g(r, 0) * y(r, 0);
                  }
                  Matrix d(y.rows(), 1);
                  for (std::size_t k = 0; k < seg.size(); ++k) {
                    const auto r = static_cast<Eigen::Index>(k);
                    d(r, 0) = y(r, 0) * (g(r, 0) - dot[static_cast<std::size_t>(seg[k])]);
                  }
                  tp.accumulate(x, d);
                });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const auto r = x.rows();
  const auto c = x.cols();
  return t.push(std::move(out), t.needs_grad(x), [x, r, c](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_expr(x, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean(Var x) {
  if (x.value().size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.value().size()));
}

}  // namespace aim::nn
