#include "geomdiff/autodiff.hpp"

#include <cmath>

namespace geomdiff::ad {

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("autodiff: variables from different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::invalid_argument("autodiff: unbound variable");
  return *a.tape;
}

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

Matrix sigmoid_of(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, Matrix(), false, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Matrix value) { return constant(std::move(value)); }

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{Matrix(), &p.value, &p, Matrix(), false, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Tape::grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }

Var Tape::record(Matrix value, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, Matrix(), false, std::move(fn)});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::add_grad(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.touched) {
    n.grad = g;
    n.touched = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var out, const Matrix& seed) {
  if (out.tape != this) throw std::invalid_argument("autodiff: backward on foreign variable");
  for (Node& n : nodes_) {
    n.touched = false;
    n.grad.resize(0, 0);
  }
  const Matrix& v = value(out);
  same_shape(v, seed, "backward seed");
  add_grad(out.id, seed);
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.touched && n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (!n.touched && !n.backward) {
      const Matrix& val = n.external != nullptr ? *n.external : n.value;
      n.grad = Matrix::Zero(val.rows(), val.cols());
    }
  }
}

void Tape::accumulate_parameter_grads(double scale) {
  for (Node& n : nodes_)
    if (n.parameter != nullptr && n.touched) n.parameter->grad += scale * n.grad;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_dims(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return t.record(a.value() * b.value(), [a, b](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    tp.add_grad(a.id, g * b.value().transpose());
    tp.add_grad(b.id, a.value().transpose() * g);
  });
}

Var matmul(Var a, const Matrix& b) {
  Tape& t = tape_of(a);
  require_dims(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return t.record(a.value() * b, [a, b](Tape& tp, int self) { tp.add_grad(a.id, tp.node_grad(self) * b.transpose()); });
}

Var matmul(const Matrix& a, Var b) {
  Tape& t = tape_of(b);
  require_dims(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return t.record(a * b.value(), [a, b](Tape& tp, int self) { tp.add_grad(b.id, a.transpose() * tp.node_grad(self)); });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), [a, b](Tape& tp, int self) {
    tp.add_grad(a.id, tp.node_grad(self));
    tp.add_grad(b.id, tp.node_grad(self));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), [a, b](Tape& tp, int self) {
    tp.add_grad(a.id, tp.node_grad(self));
    tp.add_grad(b.id, -tp.node_grad(self));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a.value(), b.value(), "mul");
  return t.record(a.value().cwiseProduct(b.value()), [a, b](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    tp.add_grad(a.id, g.cwiseProduct(b.value()));
    tp.add_grad(b.id, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return tape_of(a).record(s * a.value(), [a, s](Tape& tp, int self) { tp.add_grad(a.id, s * tp.node_grad(self)); });
}

Var add_scalar(Var a, double s) {
  return tape_of(a).record((a.value().array() + s).matrix(),
                           [a](Tape& tp, int self) { tp.add_grad(a.id, tp.node_grad(self)); });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  require_dims(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), [a, row](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    tp.add_grad(a.id, g);
    tp.add_grad(row.id, g.colwise().sum());
  });
}

Var mul_col(Var col, Var a) {
  Tape& t = tape_of(col, a);
  require_dims(col.cols() == 1 && col.rows() == a.rows(), "mul_col: shape mismatch");
  Matrix out = col.value().col(0).asDiagonal() * a.value();
  return t.record(std::move(out), [col, a](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    tp.add_grad(a.id, col.value().col(0).asDiagonal() * g);
    tp.add_grad(col.id, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

Var silu(Var a) {
  const Matrix s = sigmoid_of(a.value());
  Matrix out = a.value().cwiseProduct(s);
  return tape_of(a).record(std::move(out), [a, s](Tape& tp, int self) {
    const Matrix d = (s.array() * (1.0 + a.value().array() * (1.0 - s.array()))).matrix();
    tp.add_grad(a.id, tp.node_grad(self).cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Matrix s = sigmoid_of(a.value());
  return tape_of(a).record(s, [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.add_grad(a.id, tp.node_grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var tanh(Var a) {
  Matrix y = a.value().array().tanh().matrix();
  return tape_of(a).record(std::move(y), [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.add_grad(a.id, tp.node_grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var exp(Var a) {
  Matrix y = a.value().array().exp().matrix();
  return tape_of(a).record(std::move(y), [a](Tape& tp, int self) {
    tp.add_grad(a.id, tp.node_grad(self).cwiseProduct(tp.value(Var{&tp, self})));
  });
}

Var square(Var a) {
  return tape_of(a).record(a.value().array().square().matrix(), [a](Tape& tp, int self) {
    tp.add_grad(a.id, 2.0 * tp.node_grad(self).cwiseProduct(a.value()));
  });
}

Var softmax_rows(Var a) {
  Matrix y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double mx = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - mx).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return tape_of(a).record(std::move(y), [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    const Matrix& g = tp.node_grad(self);
    const Vector inner = g.cwiseProduct(y).rowwise().sum();
    Matrix d = g;
    d.colwise() -= inner;
    tp.add_grad(a.id, d.cwiseProduct(y));
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(out), [a](Tape& tp, int self) {
    tp.add_grad(a.id, Matrix::Constant(a.rows(), a.cols(), tp.node_grad(self)(0, 0)));
  });
}

Var mean_rows(Var a) {
  require_dims(a.rows() > 0, "mean_rows: empty input");
  const double n = static_cast<double>(a.rows());
  return tape_of(a).record(a.value().colwise().mean(), [a, n](Tape& tp, int self) {
    tp.add_grad(a.id, (tp.node_grad(self) / n).replicate(a.rows(), 1));
  });
}

Var sum_cols(Var a) {
  return tape_of(a).record(a.value().rowwise().sum(), [a](Tape& tp, int self) {
    tp.add_grad(a.id, tp.node_grad(self).replicate(1, a.cols()));
  });
}

Var broadcast_rows(Var row, Eigen::Index n) {
  require_dims(row.rows() == 1, "broadcast_rows: expects a row");
  return tape_of(row).record(row.value().replicate(n, 1), [row](Tape& tp, int self) {
    tp.add_grad(row.id, tp.node_grad(self).colwise().sum());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require_dims(!parts.empty(), "concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require_dims(p.tape == &t && p.rows() == rows, "concat_cols: shape mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(out), [parts](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      tp.add_grad(p.id, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require_dims(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  return tape_of(a).record(a.value().middleCols(start, count), [a, start, count](Tape& tp, int self) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    g.middleCols(start, count) = tp.node_grad(self);
    tp.add_grad(a.id, g);
  });
}

Var transpose(Var a) {
  return tape_of(a).record(a.value().transpose(),
                           [a](Tape& tp, int self) { tp.add_grad(a.id, tp.node_grad(self).transpose()); });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  const Matrix& v = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), v.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    require_dims(index[r] >= 0 && index[r] < v.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = v.row(index[r]);
  }
  return tape_of(a).record(std::move(out), [a, index](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    Matrix acc = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < index.size(); ++r) acc.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
    tp.add_grad(a.id, acc);
  });
}

Var sum_groups(Var a, Eigen::Index group) {
  require_dims(group > 0 && a.rows() % group == 0, "sum_groups: rows not divisible by group size");
  const Eigen::Index n = a.rows() / group;
  const Matrix& v = a.value();
  Matrix out = Matrix::Zero(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = v.middleRows(i * group, group).colwise().sum();
  return tape_of(a).record(std::move(out), [a, group, n](Tape& tp, int self) {
    const Matrix& g = tp.node_grad(self);
    Matrix acc(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < n; ++i) acc.middleRows(i * group, group) = g.row(i).replicate(group, 1);
    tp.add_grad(a.id, acc);
  });
}

Var row_dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  same_shape(a.value(), b.value(), "row_dot");
  return t.record(a.value().cwiseProduct(b.value()).rowwise().sum(), [a, b](Tape& tp, int self) {
    const Vector g = tp.node_grad(self).col(0);
    tp.add_grad(a.id, g.asDiagonal() * b.value());
    tp.add_grad(b.id, g.asDiagonal() * a.value());
  });
}

}  // namespace geomdiff::ad
