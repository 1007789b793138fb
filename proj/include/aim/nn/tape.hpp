#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace aim::nn {

#if AIM_NN_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::vector<int>;

/// Trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records a forward computation and replays it backwards. A tape is used
/// for one forward/backward pair and then cleared.
class Tape {
 public:
  Var constant(Matrix m);
  /// Parameter leaf; gradients flow into `p.grad` on backward.
  Var parameter(Parameter& p);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward pass with respect to `v` (zero-size if
  /// no gradient reached it).
  const Matrix& grad(Var v) const;

  /// Seeds the 1x1 root with 1 and accumulates parameter gradients.
  void backward(Var root);
  void backward(Var root, const Matrix& seed);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  /// Sign pattern of every piecewise-linear activation recorded so far.
  /// Finite-difference checks use it to detect kink crossings.
  const std::vector<std::uint8_t>& activation_pattern() const { return pattern_; }

  // op construction (used by the free functions in ops)
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& out)>;
  Var push(Matrix value, bool needs_grad, Backward back);
  bool needs_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).needs_grad; }
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g) {
    auto& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }
  void record_pattern(const Matrix& pre);

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    Backward back;
    Parameter* param = nullptr;
    bool needs_grad = false;
    const Matrix& value() const { return ref ? *ref : own; }
  };
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::uint8_t> pattern_;
};

// ---- ops ----------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var scale(Var a, Scalar c);
Var add_row(Var x, Var bias);             // bias 1 x cols broadcast over rows
Var mul_rows(Var x, Var w);               // w rows x 1 broadcast over cols
Var relu(Var x);
Var leaky_relu(Var x, Scalar slope);
Var tanh(Var x);
Var concat_cols(Var a, Var b);
Var gather_rows(Var x, const Index& idx);
/// out[idx[k]] += x[k] for an n-row output.
Var scatter_add_rows(Var x, const Index& idx, int n);
/// Row mean per target; targets without rows stay zero.
Var scatter_mean_rows(Var x, const Index& idx, int n);
/// Softmax of a column vector within groups given by `seg`.
Var segment_softmax(Var x, const Index& seg, int n);
Var sum(Var x);   // 1x1
Var mean(Var x);  // 1x1

}  // namespace aim::nn
