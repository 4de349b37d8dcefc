#include "storyalign/diff.hpp"

#include <cmath>
#include <limits>

#include "storyalign/error.hpp"

namespace storyalign::diff {

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "node is not a scalar");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, "constant", false, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, "parameter", true, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(double value) { return parameter(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward, std::string_view op) {
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_[p].requires_grad;
  Node node{std::move(value), {}, std::move(parents), {}, op, false, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error(ErrorKind::InvalidArgument, "root belongs to another tape");
  const auto& rv = nodes_[root.id].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "backward needs a scalar root, got " + std::to_string(rv.rows()) +
                                              "x" + std::to_string(rv.cols()));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

GradCheckResult finite_difference_check(const LossBuilder& build, const std::vector<Matrix>& params, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");

  auto evaluate = [&](const std::vector<Matrix>& ps, std::vector<Matrix>* grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const auto& p : ps) vars.push_back(tape.parameter(p));
    Var root = build(tape, vars);
    const double value = root.scalar();
    if (grads) {
      tape.backward(root);
      grads->clear();
      for (auto v : vars) grads->push_back(tape.grad(v));
    }
    return value;
  };

  GradCheckResult result;
  std::vector<Matrix> analytic;
  evaluate(params, &analytic);
  result.evaluations = 1;
  result.per_param.assign(params.size(), 0.0);

  std::vector<Matrix> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index e = 0; e < params[p].size(); ++e) {
      const double orig = params[p].data()[e];
      probe[p].data()[e] = orig + h;
      const double up = evaluate(probe, nullptr);
      probe[p].data()[e] = orig - h;
      const double down = evaluate(probe, nullptr);
      probe[p].data()[e] = orig;
      result.evaluations += 2;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p].data()[e];
      double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      result.per_param[p] = std::max(result.per_param[p], rel);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p;
        result.worst_entry = static_cast<std::size_t>(e);
      }
    }
  }
  return result;
}

}  // namespace storyalign::diff
