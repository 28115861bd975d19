#pragma once

// Minimal reverse-mode differentiation over dense row-major-agnostic Eigen
// matrices. A Tape records one or more forward computations; backward()
// walks the records in reverse and accumulates gradients into caller-owned
// parameter gradient buffers. Parameters are referenced, never copied.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  /// With gradients disabled no backward closures are recorded.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  /// Leaf that refers to external storage; its gradient is added to
  /// param_grads[param_index] by backward(). The storage must outlive the tape.
  Var parameter(const Matrix& value, std::size_t param_index);

  const Matrix& value(Var v) const;
  /// Empty matrix if no gradient reached v.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  /// Adds an upstream gradient to v before backward().
  void seed(Var v, const Matrix& upstream);
  void seed(Var v, double upstream);

  /// Propagates seeded gradients. param_grads must already be sized for every
  /// parameter index used; entries are accumulated, not overwritten.
  void backward(std::vector<Matrix>& param_grads);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_bt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  Var add_constant(Var a, const Matrix& c);
  Var scale(Var a, double s);
  /// Elementwise product with a constant (dropout masks).
  Var mul_constant(Var a, const Matrix& c);
  Var gelu(Var a);
  Var elu(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  Var cols(Var a, Index start, Index count);
  Var hconcat(std::span<const Var> parts);
  Var row(Var a, Index i);
  Var gather_rows(Var table, std::span<const int> ids);

 private:
  struct Node {
    Matrix own;
    const Matrix* external = nullptr;
    Matrix grad;
    std::ptrdiff_t param = -1;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t)> backward;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> backward);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  void accumulate(std::size_t id, const Matrix& g);
  template <class Expr>
  void accumulate_expr(std::size_t id, const Expr& g);

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace dcm
