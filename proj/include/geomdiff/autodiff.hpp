#pragma once

#include <functional>
#include <string>
#include <vector>

#include "geomdiff/numcore.hpp"

// Matrix-level reverse-mode differentiation. A Tape records one forward pass; the
// recorded graph can be swept backward any number of times with different seeds.
namespace geomdiff::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Differentiable leaf whose adjoint is readable after backward().
  Var input(Matrix value);
  // Leaf aliasing a parameter; backward() leaves its adjoint in the node,
  // accumulate_parameter_grads() adds it to Parameter::grad.
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;

  void backward(Var out, const Matrix& seed);
  void accumulate_parameter_grads(double scale = 1.0);
  std::size_t size() const { return nodes_.size(); }

  using BackwardFn = std::function<void(Tape&, int self)>;
  Var record(Matrix value, BackwardFn fn);
  // Adds `g` to the adjoint of node `id` (allocating it on first touch).
  void add_grad(int id, const Matrix& g);
  const Matrix& node_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter* parameter = nullptr;
    Matrix grad;
    bool touched = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var matmul(Var a, const Matrix& b);
Var matmul(const Matrix& a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);          // a (n×c) + row (1×c) on every row
Var mul_col(Var col, Var a);          // col (n×1) scales each row of a
Var silu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var square(Var a);
Var softmax_rows(Var a);
Var sum(Var a);                       // 1×1
Var mean_rows(Var a);                 // 1×c
Var sum_cols(Var a);                  // n×1
Var broadcast_rows(Var row, Eigen::Index n);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var transpose(Var a);
Var gather_rows(Var a, const std::vector<int>& index);
// Sums consecutive blocks of `group` rows: (n·group)×c → n×c.
Var sum_groups(Var a, Eigen::Index group);
Var row_dot(Var a, Var b);            // n×1 of row-wise inner products

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace geomdiff::ad
