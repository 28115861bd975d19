#include "dcm/autograd.hpp"

#include "dcm/errors.hpp"

#include <cmath>
#include <string>

namespace dcm {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, std::size_t)> backward) {
  Node node;
  node.own = std::move(value);
  node.needs_grad = needs_grad && grad_enabled_;
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(const Matrix& value, std::size_t param_index) {
  Node node;
  node.external = &value;
  node.param = static_cast<std::ptrdiff_t>(param_index);
  node.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.own;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

template <class Expr>
void Tape::accumulate_expr(std::size_t id, const Expr& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::seed(Var v, const Matrix& upstream) {
  require_same_shape(value(v), upstream, "seed");
  accumulate(v.id, upstream);
}

void Tape::seed(Var v, double upstream) {
  const Matrix& val = value(v);
  if (val.size() != 1) throw ShapeError("seed: scalar seed on non-scalar value");
  accumulate(v.id, Matrix::Constant(1, 1, upstream));
}

void Tape::backward(std::vector<Matrix>& param_grads) {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param >= 0) {
      Matrix& dst = param_grads.at(static_cast<std::size_t>(n.param));
      if (dst.size() == 0) {
        dst = n.grad;
      } else {
        dst += n.grad;
      }
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.rows()) throw ShapeError("matmul: inner dimension mismatch");
  Matrix out = va * vb;
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.needs(a)) t.accumulate_expr(a.id, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate_expr(b.id, t.value(a).transpose() * g);
  });
}

Var Tape::matmul_bt(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.cols()) throw ShapeError("matmul_bt: inner dimension mismatch");
  Matrix out = va * vb.transpose();
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.needs(a)) t.accumulate_expr(a.id, g * t.value(b));
    if (t.needs(b)) t.accumulate_expr(b.id, g.transpose() * t.value(a));
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Matrix out = value(a) + value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& va = value(a);
  const Matrix& vr = value(row);
  if (vr.rows() != 1 || vr.cols() != va.cols()) throw ShapeError("add_row: bias shape mismatch");
  Matrix out = va.rowwise() + vr.row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.accumulate(a.id, g);
    if (t.needs(row)) t.accumulate_expr(row.id, g.colwise().sum());
  });
}

Var Tape::add_constant(Var a, const Matrix& c) {
  require_same_shape(value(a), c, "add_constant");
  Matrix out = value(a) + c;
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.nodes_[self].grad);
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a) * s;
  return push(std::move(out), needs(a), [a, s](Tape& t, std::size_t self) {
    t.accumulate_expr(a.id, t.nodes_[self].grad * s);
  });
}

Var Tape::mul_constant(Var a, const Matrix& c) {
  require_same_shape(value(a), c, "mul_constant");
  Matrix out = value(a).cwiseProduct(c);
  return push(std::move(out), needs(a), [a, c](Tape& t, std::size_t self) {
    t.accumulate_expr(a.id, t.nodes_[self].grad.cwiseProduct(c));
  });
}

Var Tape::gelu(Var a) {
  const Matrix& x = value(a);
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a);
    Matrix d = x.unaryExpr([](double v) {
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      return 0.5 * (1.0 + th) +
             0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    });
    t.accumulate_expr(a.id, t.nodes_[self].grad.cwiseProduct(d));
  });
}

Var Tape::elu(Var a) {
  Matrix out = value(a).unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    Matrix d = t.value(a).unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
    t.accumulate_expr(a.id, t.nodes_[self].grad.cwiseProduct(d));
  });
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a).unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(Var{self});
    Matrix d = y.array() * (1.0 - y.array());
    t.accumulate_expr(a.id, t.nodes_[self].grad.cwiseProduct(d));
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) {
    const Matrix& y = t.value(Var{self});
    const Matrix& g = t.nodes_[self].grad;
    Vector dot = (g.cwiseProduct(y)).rowwise().sum();
    Matrix dx = y.cwiseProduct(g - dot.replicate(1, g.cols()));
    t.accumulate(a.id, dx);
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& vx = value(x);
  const Matrix& vg = value(gamma);
  const Matrix& vb = value(beta);
  if (vg.rows() != 1 || vg.cols() != vx.cols() || vb.rows() != 1 || vb.cols() != vx.cols()) {
    throw ShapeError("layer_norm: affine parameter shape mismatch");
  }
  const Index n = vx.rows();
  const Index h = vx.cols();
  Matrix xhat(n, h);
  Vector inv_std(n);
  for (Index r = 0; r < n; ++r) {
    const double mean = vx.row(r).mean();
    const double var = (vx.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (vx.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * vg.row(0).array();
  out.rowwise() += vb.row(0);
  const bool track = needs(x) || needs(gamma) || needs(beta);
  return push(std::move(out), track,
              [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, std::size_t self) {
                const Matrix& g = t.nodes_[self].grad;
                if (t.needs(gamma)) t.accumulate_expr(gamma.id, g.cwiseProduct(xhat).colwise().sum());
                if (t.needs(beta)) t.accumulate_expr(beta.id, g.colwise().sum());
                if (t.needs(x)) {
                  const Matrix& vg = t.value(gamma);
                  Matrix dxhat = g.array().rowwise() * vg.row(0).array();
                  const double inv_h = 1.0 / static_cast<double>(g.cols());
                  Matrix dx(g.rows(), g.cols());
                  for (Index r = 0; r < g.rows(); ++r) {
                    const double mean_d = dxhat.row(r).sum() * inv_h;
                    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) * inv_h;
                    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - mean_d -
                                              xhat.row(r).array() * mean_dx);
                  }
                  t.accumulate(x.id, dx);
                }
              });
}

Var Tape::cols(Var a, Index start, Index count) {
  const Matrix& va = value(a);
  if (start < 0 || count < 0 || start + count > va.cols()) throw ShapeError("cols: out of range");
  Matrix out = va.middleCols(start, count);
  return push(std::move(out), needs(a), [a, start, count](Tape& t, std::size_t self) {
    const Matrix& va = t.value(a);
    Matrix g = Matrix::Zero(va.rows(), va.cols());
    g.middleCols(start, count) = t.nodes_[self].grad;
    t.accumulate(a.id, g);
  });
}

Var Tape::hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("hconcat: no inputs");
  const Index rows = value(parts[0]).rows();
  Index total = 0;
  bool track = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ShapeError("hconcat: row mismatch");
    total += value(p).cols();
    track = track || needs(p);
  }
  Matrix out(rows, total);
  Index offset = 0;
  for (Var p : parts) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), track, [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    Index off = 0;
    for (Var p : ids) {
      const Index c = t.value(p).cols();
      if (t.needs(p)) t.accumulate_expr(p.id, g.middleCols(off, c));
      off += c;
    }
  });
}

Var Tape::row(Var a, Index i) {
  const Matrix& va = value(a);
  if (i < 0 || i >= va.rows()) throw ShapeError("row: index out of range");
  Matrix out = va.row(i);
  return push(std::move(out), needs(a), [a, i](Tape& t, std::size_t self) {
    const Matrix& va = t.value(a);
    Matrix g = Matrix::Zero(va.rows(), va.cols());
    g.row(i) = t.nodes_[self].grad.row(0);
    t.accumulate(a.id, g);
  });
}

Var Tape::gather_rows(Var table, std::span<const int> ids) {
  const Matrix& vt = value(table);
  Matrix out(static_cast<Index>(ids.size()), vt.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= vt.rows()) throw ShapeError("gather_rows: id out of range");
    out.row(static_cast<Index>(r)) = vt.row(ids[r]);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return push(std::move(out), needs(table), [table, rows = std::move(rows)](Tape& t, std::size_t self) {
    const Matrix& vt = t.value(table);
    const Matrix& g = t.nodes_[self].grad;
    Matrix acc = Matrix::Zero(vt.rows(), vt.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) acc.row(rows[r]) += g.row(static_cast<Index>(r));
    t.accumulate(table.id, acc);
  });
}

}  // namespace dcm
