#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ieqa::nn {

using Matrix = Eigen::MatrixXd;

/// A named trainable tensor. `index` is its slot in the owning model's
/// parameter list and in every Gradients vector.
struct Parameter {
  std::string name;
  Matrix value;
  bool backbone = false;
  std::size_t index = 0;

  std::string group() const { return name.substr(0, name.find('.')); }
};

/// One gradient matrix per model parameter, same order.
using Gradients = std::vector<Matrix>;

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recorder. Build a graph by calling the free op functions,
/// then call backward() once on a 1x1 output.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Matrix value);
  Var param(const Parameter& p);

  /// Propagates d(out)/d(node) * seed and adds parameter gradients into `grads`.
  void backward(Var out, double seed, Gradients& grads);

  // op-author interface
  Var push(Matrix value, Backward back);
  const Matrix& value(int id) const { return nodes_[id].value; }
  Matrix& grad(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    const Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1xN row to every row of x.
Var add_row(Var x, Var row);
Var hadamard(Var a, Var b);
Var scale(Var x, double s);
/// Exact GELU: x * Phi(x).
Var gelu(Var x);
Var softmax_rows(Var x);
Var transpose(Var x);
Var mean_rows(Var x);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(Var top, Var bottom);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
/// Rows of `table` selected by `ids` (embedding lookup).
Var gather_rows(Var table, std::span<const int> ids);
/// Cosine similarity of two 1xN rows, as a 1x1.
Var row_cosine(Var a, Var b);

}  // namespace ieqa::nn
