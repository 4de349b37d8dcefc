#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace storyalign::diff {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  double scalar() const;  // value of a 1x1 node
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Linear record of a computation. Parents always precede children, so the
/// reverse of insertion order is a valid reverse topological order.
///
/// A tape belongs to one thread; independent tapes may be used concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  Var constant(double value);
  /// Trainable leaf: backward() fills its gradient.
  Var parameter(Matrix value);
  Var parameter(double value);

  Var record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward, std::string_view op);

  /// Reverse sweep from a 1x1 root. Gradients of earlier sweeps are discarded.
  /// Throws ShapeMismatch when the root is not scalar.
  void backward(Var root);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() root with respect to `v`; zeros when
  /// the node did not influence the root.
  Matrix grad(Var v) const;

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Accumulation buffer of a parent, allocated on first use.
  Matrix& grad_buffer(std::size_t id);
  const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::string_view op;
    bool trainable = false;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Recorded operations. All shapes are checked; violations throw ShapeMismatch.
// Indexing conventions: "flat" indices are row-major (r * cols + c).

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double k);
/// a * s for a 1x1 node s.
Var scale_by(Var a, Var s);
/// k * a + c elementwise, constants k and c.
Var affine(Var a, double k, double c);
/// Adds a 1 x cols row to every row of a.
Var add_row_broadcast(Var a, Var row);
/// Divides each row by its L2 norm; a zero row throws DegenerateInput.
Var row_l2_normalize(Var a);
/// Frobenius inner product of two equally shaped nodes, 1x1.
Var dot(Var a, Var b);
Var exp(Var a);
/// Throws DegenerateInput on non-positive entries.
Var log(Var a);
Var sigmoid(Var a);
/// Elementwise clamp; the gradient is zero where the input lies outside [lo, hi].
Var clamp(Var a, double lo, double hi);
/// Output k (column vector) is log(sum_{i in groups[k]} exp(a_flat[i])).
Var logsumexp_over_list(Var a, const std::vector<std::vector<std::size_t>>& groups);
/// Column vector of a's entries at the given flat indices.
Var gather(Var a, std::span<const std::size_t> flat_indices);
/// Rows of a in the given order (repeats allowed).
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var block(Var a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
Var hconcat(std::span<const Var> parts);

struct ArgMax {
  Var value;                         // rows x 1
  std::vector<std::size_t> indices;  // column of the maximum in each row
};
/// Row-wise maximum; gradient flows only to the arg-max entry, ties go to the lowest column.
ArgMax rowwise_max_with_index(Var a);

/// Mean of each row segment [offsets[k], offsets[k+1]); output has offsets.size()-1 rows.
Var mean_over_rows(Var a, std::span<const std::size_t> offsets);
/// Mean over all rows, 1 x cols.
Var mean_over_rows(Var a);
/// Pairwise Euclidean distances between rows of a and rows of b (a.rows x b.rows).
/// The subgradient at zero distance is taken as zero.
Var euclidean_distance(Var a, Var b);
/// Sum of all entries, 1x1.
Var sum(Var a);
/// Mean of all entries, 1x1.
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }

/// Builds a scalar loss from freshly recorded parameter leaves.
using LossBuilder = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  std::vector<double> per_param;  // max relative error per parameter block
  std::size_t evaluations = 0;
};

/// Compares the tape gradient against central differences with step h.
/// Relative error per entry is |analytic - numeric| / max(1, |analytic|).
GradCheckResult finite_difference_check(const LossBuilder& build, const std::vector<Matrix>& params,
                                        double h = 1e-4);

}  // namespace storyalign::diff
