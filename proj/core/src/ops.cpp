#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "storyalign/diff.hpp"
#include "storyalign/error.hpp"

namespace storyalign::diff {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error(ErrorKind::InvalidArgument, "variable is not attached to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error(ErrorKind::InvalidArgument, "variables live on different tapes");
  return tape_of(a);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(Var a, Var b, const char* op) {
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + shape(x) + " vs " + shape(y));
  }
}

void require_scalar(Var s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": expected 1x1");
}

// Reads a row-major flat index from a column-major matrix.
double& at_flat(Matrix& m, std::size_t flat) {
  const auto cols = static_cast<std::size_t>(m.cols());
  return m(static_cast<Eigen::Index>(flat / cols), static_cast<Eigen::Index>(flat % cols));
}
double at_flat(const Matrix& m, std::size_t flat) {
  const auto cols = static_cast<std::size_t>(m.cols());
  return m(static_cast<Eigen::Index>(flat / cols), static_cast<Eigen::Index>(flat % cols));
}

void check_flat(const Matrix& m, std::size_t flat, const char* op) {
  if (flat >= static_cast<std::size_t>(m.size())) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": index " + std::to_string(flat) +
                                              " out of range for " + shape(m));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "matmul: " + shape(a.value()) + " * " + shape(b.value()));
  }
  const auto ia = a.id, ib = b.id;
  return t.record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.requires_grad(ib)) tp.grad_buffer(ib).noalias() += tp.value(ia).transpose() * g;
  }, "matmul");
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  return t.record(a.value().transpose(), {ia}, [ia](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia) += tp.upstream(self).transpose();
  }, "transpose");
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  const auto ia = a.id, ib = b.id;
  return t.record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += tp.upstream(self);
    if (tp.requires_grad(ib)) tp.grad_buffer(ib) += tp.upstream(self);
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  const auto ia = a.id, ib = b.id;
  return t.record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += tp.upstream(self);
    if (tp.requires_grad(ib)) tp.grad_buffer(ib) -= tp.upstream(self);
  }, "sub");
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "hadamard");
  const auto ia = a.id, ib = b.id;
  return t.record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += g.cwiseProduct(tp.value(ib));
    if (tp.requires_grad(ib)) tp.grad_buffer(ib) += g.cwiseProduct(tp.value(ia));
  }, "hadamard");
}

Var scale(Var a, double k) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  return t.record(a.value() * k, {ia}, [ia, k](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia) += k * tp.upstream(self);
  }, "scale");
}

Var scale_by(Var a, Var s) {
  Tape& t = tape_of(a, s);
  require_scalar(s, "scale_by");
  const auto ia = a.id, is = s.id;
  return t.record(a.value() * s.scalar(), {ia, is}, [ia, is](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += tp.value(is)(0, 0) * g;
    if (tp.requires_grad(is)) tp.grad_buffer(is)(0, 0) += g.cwiseProduct(tp.value(ia)).sum();
  }, "scale_by");
}

Var affine(Var a, double k, double c) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  Matrix v = (a.value() * k).array() + c;
  return t.record(std::move(v), {ia}, [ia, k](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia) += k * tp.upstream(self);
  }, "affine");
}

Var add_row_broadcast(Var a, Var row) {
  Tape& t = tape_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "add_row_broadcast: " + shape(a.value()) + " + " + shape(row.value()));
  }
  const auto ia = a.id, ir = row.id;
  Matrix v = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(v), {ia, ir}, [ia, ir](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += g;
    if (tp.requires_grad(ir)) tp.grad_buffer(ir) += g.colwise().sum();
  }, "add_row_broadcast");
}

Var row_l2_normalize(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > 0.0)) {
      throw Error(ErrorKind::DegenerateInput, "row_l2_normalize: row " + std::to_string(r) + " has zero norm");
    }
  }
  Matrix y = norms.cwiseInverse().asDiagonal() * x;
  const auto ia = a.id;
  return t.record(std::move(y), {ia}, [ia, norms](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    const Matrix& y = tp.value(self);
    Eigen::VectorXd proj = y.cwiseProduct(g).rowwise().sum();
    Matrix dx = g - proj.asDiagonal() * y;
    tp.grad_buffer(ia) += norms.cwiseInverse().asDiagonal() * dx;
  }, "row_l2_normalize");
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "dot");
  const auto ia = a.id, ib = b.id;
  return t.record(Matrix::Constant(1, 1, a.value().cwiseProduct(b.value()).sum()), {ia, ib},
                  [ia, ib](Tape& tp, std::size_t self) {
                    const double g = tp.upstream(self)(0, 0);
                    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += g * tp.value(ib);
                    if (tp.requires_grad(ib)) tp.grad_buffer(ib) += g * tp.value(ia);
                  },
                  "dot");
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  return t.record(a.value().array().exp().matrix(), {ia}, [ia](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia) += tp.upstream(self).cwiseProduct(tp.value(self));
  }, "exp");
}

Var log(Var a) {
  Tape& t = tape_of(a);
  if (!(a.value().array() > 0.0).all()) throw Error(ErrorKind::DegenerateInput, "log of a non-positive value");
  const auto ia = a.id;
  return t.record(a.value().array().log().matrix(), {ia}, [ia](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia) += tp.upstream(self).cwiseQuotient(tp.value(ia));
  }, "log");
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  Matrix y = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  return t.record(std::move(y), {ia}, [ia](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    tp.grad_buffer(ia).array() += tp.upstream(self).array() * y.array() * (1.0 - y.array());
  }, "sigmoid");
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tape_of(a);
  if (!(lo <= hi)) throw Error(ErrorKind::InvalidArgument, "clamp: lo > hi");
  const auto ia = a.id;
  Matrix y = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.record(std::move(y), {ia}, [ia, lo, hi](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      if (v >= lo && v <= hi) gx.data()[i] += g.data()[i];
    }
  }, "clamp");
}

Var logsumexp_over_list(Var a, const std::vector<std::vector<std::size_t>>& groups) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(groups.size()), 1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (g.empty()) throw Error(ErrorKind::EmptyInput, "logsumexp_over_list: empty group");
    double m = -std::numeric_limits<double>::infinity();
    for (auto i : g) {
      check_flat(x, i, "logsumexp_over_list");
      m = std::max(m, at_flat(x, i));
    }
    double s = 0.0;
    for (auto i : g) s += std::exp(at_flat(x, i) - m);
    out(static_cast<Eigen::Index>(k), 0) = m + std::log(s);
  }
  const auto ia = a.id;
  return t.record(std::move(out), {ia}, [ia, groups](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      for (auto i : groups[k]) at_flat(gx, i) += g(kk, 0) * std::exp(at_flat(x, i) - y(kk, 0));
    }
  }, "logsumexp_over_list");
}

Var gather(Var a, std::span<const std::size_t> flat_indices) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    check_flat(x, idx[k], "gather");
    out(static_cast<Eigen::Index>(k), 0) = at_flat(x, idx[k]);
  }
  const auto ia = a.id;
  return t.record(std::move(out), {ia}, [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < idx.size(); ++k) at_flat(gx, idx[k]) += g(static_cast<Eigen::Index>(k), 0);
  }, "gather");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= static_cast<std::size_t>(x.rows())) {
      throw Error(ErrorKind::ShapeMismatch, "gather_rows: row " + std::to_string(idx[k]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  }
  const auto ia = a.id;
  return t.record(std::move(out), {ia}, [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      gx.row(static_cast<Eigen::Index>(idx[k])) += g.row(static_cast<Eigen::Index>(k));
    }
  }, "gather_rows");
}

Var block(Var a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > a.rows() || col + cols > a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "block out of range for " + shape(a.value()));
  }
  const auto ia = a.id;
  return t.record(a.value().block(row, col, rows, cols), {ia},
                  [ia, row, col, rows, cols](Tape& tp, std::size_t self) {
                    tp.grad_buffer(ia).block(row, col, rows, cols) += tp.upstream(self);
                  },
                  "block");
}

Var hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::EmptyInput, "hconcat of nothing");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  for (auto p : parts) {
    tape_of(parts.front(), p);
    if (p.rows() != rows) throw Error(ErrorKind::ShapeMismatch, "hconcat: row counts differ");
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (auto p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.record(std::move(out), ids, [ids](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Eigen::Index c = 0;
    for (auto id : ids) {
      const auto w = tp.value(id).cols();
      if (tp.requires_grad(id)) tp.grad_buffer(id) += g.middleCols(c, w);
      c += w;
    }
  }, "hconcat");
}

ArgMax rowwise_max_with_index(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (x.cols() == 0) throw Error(ErrorKind::EmptyInput, "rowwise_max_with_index over zero columns");
  std::vector<std::size_t> arg(static_cast<std::size_t>(x.rows()));
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < x.cols(); ++c) {
      if (x(r, c) > x(r, best)) best = c;
    }
    arg[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
    out(r, 0) = x(r, best);
  }
  const auto ia = a.id;
  Var v = t.record(std::move(out), {ia}, [ia, arg](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < arg.size(); ++r) {
      gx(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(arg[r])) += g(static_cast<Eigen::Index>(r), 0);
    }
  }, "rowwise_max_with_index");
  return ArgMax{v, std::move(arg)};
}

Var mean_over_rows(Var a, std::span<const std::size_t> offsets) {
  Tape& t = tape_of(a);
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != static_cast<std::size_t>(a.rows())) {
    throw Error(ErrorKind::ShapeMismatch, "mean_over_rows: offsets must span [0, rows]");
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(off.size() - 1), x.cols());
  for (std::size_t k = 0; k + 1 < off.size(); ++k) {
    if (off[k + 1] <= off[k]) throw Error(ErrorKind::EmptyInput, "mean_over_rows: empty segment");
    const auto n = static_cast<Eigen::Index>(off[k + 1] - off[k]);
    out.row(static_cast<Eigen::Index>(k)) = x.middleRows(static_cast<Eigen::Index>(off[k]), n).colwise().sum() /
                                            static_cast<double>(n);
  }
  const auto ia = a.id;
  return t.record(std::move(out), {ia}, [ia, off = std::move(off)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Matrix& gx = tp.grad_buffer(ia);
    for (std::size_t k = 0; k + 1 < off.size(); ++k) {
      const auto n = static_cast<Eigen::Index>(off[k + 1] - off[k]);
      gx.middleRows(static_cast<Eigen::Index>(off[k]), n).rowwise() +=
          g.row(static_cast<Eigen::Index>(k)) / static_cast<double>(n);
    }
  }, "mean_over_rows");
}

Var mean_over_rows(Var a) {
  const std::size_t off[2] = {0, static_cast<std::size_t>(a.rows())};
  return mean_over_rows(a, off);
}

Var euclidean_distance(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "euclidean_distance: " + shape(a.value()) + " vs " + shape(b.value()));
  }
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  Matrix d(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) d(i, j) = (x.row(i) - y.row(j)).norm();
  }
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(d), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    const Matrix& y = tp.value(ib);
    const Matrix& d = tp.value(self);
    const Matrix& g = tp.upstream(self);
    const bool ga = tp.requires_grad(ia), gb = tp.requires_grad(ib);
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    Matrix dy = Matrix::Zero(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        if (d(i, j) == 0.0) continue;
        const Eigen::RowVectorXd u = (g(i, j) / d(i, j)) * (x.row(i) - y.row(j));
        dx.row(i) += u;
        dy.row(j) -= u;
      }
    }
    if (ga) tp.grad_buffer(ia) += dx;
    if (gb) tp.grad_buffer(ib) += dy;
  }, "euclidean_distance");
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const auto ia = a.id;
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {ia}, [ia](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia).array() += tp.upstream(self)(0, 0);
  }, "sum");
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  if (a.value().size() == 0) throw Error(ErrorKind::EmptyInput, "mean of an empty node");
  const auto ia = a.id;
  const double n = static_cast<double>(a.value().size());
  return t.record(Matrix::Constant(1, 1, a.value().sum() / n), {ia}, [ia, n](Tape& tp, std::size_t self) {
    tp.grad_buffer(ia).array() += tp.upstream(self)(0, 0) / n;
  }, "mean");
}

}  // namespace storyalign::diff
