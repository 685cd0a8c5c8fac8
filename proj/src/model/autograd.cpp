#include "model/autograd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ieqa::nn {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(const Parameter& p) {
  auto v = push(p.value, nullptr);
  nodes_.back().param = &p;
  return v;
}

Var Tape::push(Matrix value, Backward back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out, double seed, Gradients& grads) {
  if (&out.tape() != this || out.value().size() != 1) throw std::logic_error("backward needs a 1x1 node on this tape");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad(out.id())(0, 0) = seed;
  for (int i = out.id(); i >= 0; --i) {
    if (nodes_[i].grad.size() == 0) continue;
    if (nodes_[i].back) nodes_[i].back(*this, i);
    if (const auto* p = nodes_[i].param) {
      auto& g = grads.at(p->index);
      if (g.size() == 0) g = Matrix::Zero(p->value.rows(), p->value.cols());
      g += nodes_[i].grad;
    }
  }
}

namespace {

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("operands live on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) throw std::logic_error("matmul shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() * b.value(), [ia, ib](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g * t.value(ib).transpose();
    t.grad(ib) += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::logic_error("add shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() + b.value(), [ia, ib](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ib) += g;
  });
}

Var add_row(Var x, Var row) {
  require_same_tape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols()) throw std::logic_error("add_row shape mismatch");
  const int ix = x.id(), ir = row.id();
  Matrix y = x.value().rowwise() + row.value().row(0);
  return x.tape().push(std::move(y), [ix, ir](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ix) += g;
    t.grad(ir) += g.colwise().sum();
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::logic_error("hadamard shape mismatch");
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), [ia, ib](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g.cwiseProduct(t.value(ib));
    t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var scale(Var x, double s) {
  const int ix = x.id();
  return x.tape().push(x.value() * s, [ix, s](Tape& t, int self) { t.grad(ix) += t.grad(self) * s; });
}

Var gelu(Var x) {
  const int ix = x.id();
  const Matrix& v = x.value();
  Matrix y(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double z = v(i);
    y(i) = 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2));
  }
  return x.tape().push(std::move(y), [ix](Tape& t, int self) {
    const Matrix g = t.grad(self);
    const Matrix& v = t.value(ix);
    Matrix& gx = t.grad(ix);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double z = v(i);
      const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      gx(i) += g(i) * (cdf + z * pdf);
    }
  });
}

Var softmax_rows(Var x) {
  const int ix = x.id();
  const Matrix& v = x.value();
  Matrix y(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mx = v.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      y(r, c) = std::exp(v(r, c) - mx);
      sum += y(r, c);
    }
    y.row(r) /= sum;
  }
  return x.tape().push(std::move(y), [ix](Tape& t, int self) {
    const Matrix g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad(ix);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      gx.row(r) += y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  });
}

Var transpose(Var x) {
  const int ix = x.id();
  return x.tape().push(x.value().transpose(), [ix](Tape& t, int self) { t.grad(ix) += t.grad(self).transpose(); });
}

Var mean_rows(Var x) {
  const int ix = x.id();
  const double n = static_cast<double>(x.rows());
  Matrix y = x.value().colwise().mean();
  return x.tape().push(std::move(y), [ix, n](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ix).rowwise() += (g.row(0) / n);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::logic_error("concat_cols of nothing");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != rows) throw std::logic_error("concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return parts[0].tape().push(std::move(y), [spans](Tape& t, int self) {
    const Matrix g = t.grad(self);
    Eigen::Index at = 0;
    for (const auto& [id, n] : spans) {
      t.grad(id) += g.middleCols(at, n);
      at += n;
    }
  });
}

Var concat_rows(Var top, Var bottom) {
  require_same_tape(top, bottom);
  if (top.cols() != bottom.cols()) throw std::logic_error("concat_rows column mismatch");
  const int it = top.id(), ib = bottom.id();
  const auto nt = top.rows(), nb = bottom.rows();
  Matrix y(nt + nb, top.cols());
  y.topRows(nt) = top.value();
  y.bottomRows(nb) = bottom.value();
  return top.tape().push(std::move(y), [it, ib, nt, nb](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(it) += g.topRows(nt);
    t.grad(ib) += g.bottomRows(nb);
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) throw std::logic_error("slice_cols out of range");
  const int ix = x.id();
  return x.tape().push(x.value().middleCols(start, count), [ix, start, count](Tape& t, int self) {
    t.grad(ix).middleCols(start, count) += t.grad(self);
  });
}

Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) throw std::logic_error("slice_rows out of range");
  const int ix = x.id();
  return x.tape().push(x.value().middleRows(start, count), [ix, start, count](Tape& t, int self) {
    t.grad(ix).middleRows(start, count) += t.grad(self);
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const int it = table.id();
  std::vector<int> rows(ids.begin(), ids.end());
  Matrix y(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) throw std::logic_error("gather_rows index out of range");
    y.row(static_cast<Eigen::Index>(i)) = table.value().row(rows[i]);
  }
  return table.tape().push(std::move(y), [it, rows](Tape& t, int self) {
    const Matrix g = t.grad(self);
    Matrix& gt = t.grad(it);
    for (std::size_t i = 0; i < rows.size(); ++i) gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var row_cosine(Var a, Var b) {
  require_same_tape(a, b);
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) throw std::logic_error("row_cosine expects 1xN rows");
  const int ia = a.id(), ib = b.id();
  const double na = a.value().norm(), nb = b.value().norm();
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine of a zero vector");
  Matrix y(1, 1);
  y(0, 0) = a.value().row(0).dot(b.value().row(0)) / (na * nb);
  return a.tape().push(std::move(y), [ia, ib, na, nb](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    const double c = t.value(self)(0, 0);
    const Matrix& va = t.value(ia);
    const Matrix& vb = t.value(ib);
    t.grad(ia) += g * (vb / (na * nb) - c * va / (na * na));
    t.grad(ib) += g * (va / (na * nb) - c * vb / (nb * nb));
  });
}

}  // namespace ieqa::nn
