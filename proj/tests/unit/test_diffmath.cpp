#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "storyalign/diff.hpp"
#include "storyalign/error.hpp"

using namespace storyalign;
using namespace storyalign::diff;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix random(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double check(const LossBuilder& build, const std::vector<Matrix>& params) {
  return finite_difference_check(build, params, 1e-4).max_rel_error;
}

}  // namespace

TEST(Backward, DotGradientIsOtherOperand) {
  Tape t;
  Var x = t.parameter(mat({{1, 2}}));
  Var y = t.constant(mat({{3, 4}}));
  Var f = dot(x, y);
  t.backward(f);
  EXPECT_EQ(t.grad(x), mat({{3, 4}}));
  EXPECT_DOUBLE_EQ(f.scalar(), 11.0);
}

TEST(Backward, SigmoidSlopeAtZero) {
  Tape t;
  Var b = t.parameter(0.0);
  t.backward(sigmoid(b));
  EXPECT_DOUBLE_EQ(t.grad(b)(0, 0), 0.25);
}

TEST(Backward, LogSumExpOfEqualLogitsSplitsEvenly) {
  Tape t;
  Var a = t.parameter(mat({{0, 0}}));
  t.backward(sum(logsumexp_over_list(a, {{0, 1}})));
  EXPECT_DOUBLE_EQ(t.grad(a)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(t.grad(a)(0, 1), 0.5);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  Tape t;
  Var w = t.parameter(mat({{1, 2}, {3, 4}}));
  Var c = t.constant(5.0);
  t.backward(c);
  EXPECT_EQ(t.grad(w), Matrix::Zero(2, 2));
}

TEST(Backward, BilinearFormGradientIsOuterProduct) {
  Tape t;
  const Matrix a = mat({{1}, {-2}, {0.5}});
  const Matrix b = mat({{3}, {4}});
  Var w = t.parameter(mat({{0.1, 0.2, 0.3}, {-0.4, 0.5, 0.6}}));
  t.backward(dot(matmul(w, t.constant(a)), t.constant(b)));
  EXPECT_TRUE(t.grad(w).isApprox(b * a.transpose(), 1e-15));
}

TEST(Backward, NonScalarRootIsRejected) {
  Tape t;
  Var w = t.parameter(mat({{1, 2}}));
  try {
    t.backward(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Ops, ShapeAndDomainErrors) {
  Tape t;
  Var a = t.parameter(mat({{1, 2}}));
  Var b = t.parameter(mat({{1, 2, 3}}));
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(matmul(a, a), Error);
  try {
    row_l2_normalize(t.constant(mat({{0, 0}})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
  try {
    log(t.constant(mat({{1, 0}})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
}

TEST(Ops, RowwiseMaxRoutesGradientToLowestTiedIndex) {
  Tape t;
  Var a = t.parameter(mat({{1, 3, 3}, {5, 2, 4}}));
  ArgMax m = rowwise_max_with_index(a);
  EXPECT_EQ(m.indices, (std::vector<std::size_t>{1, 0}));
  t.backward(sum(m.value));
  EXPECT_EQ(t.grad(a), mat({{0, 1, 0}, {1, 0, 0}}));
}

TEST(Ops, RowwiseMaxIgnoresSmallPerturbationsOfNonMaxEntries) {
  Tape t;
  const Matrix base = mat({{0.1, 0.9, 0.3}});
  Matrix bumped = base;
  bumped(0, 2) += 0.2;  // gap is 0.6, perturbation below half of it
  Var a = t.parameter(base);
  Var b = t.parameter(bumped);
  auto ma = rowwise_max_with_index(a);
  auto mb = rowwise_max_with_index(b);
  EXPECT_EQ(ma.indices, mb.indices);
  EXPECT_EQ(ma.value.scalar(), mb.value.scalar());
}

TEST(Ops, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const Matrix A = random(3, 4, rng), B = random(4, 2, rng), C = random(3, 4, rng);
  const Matrix row = random(1, 4, rng);
  const Matrix pos = (random(3, 4, rng).array().abs() + 0.5).matrix();

  const std::vector<std::pair<const char*, LossBuilder>> cases = {
      {"matmul", [&](Tape& t, std::span<const Var> p) { return sum(matmul(p[0], t.constant(B))); }},
      {"transpose", [&](Tape& t, std::span<const Var> p) { return dot(transpose(p[0]), t.constant(Matrix(C.transpose()))); }},
      {"add_sub", [&](Tape& t, std::span<const Var> p) { return dot(sub(add(p[0], p[0]), t.constant(C)), p[0]); }},
      {"hadamard", [&](Tape& t, std::span<const Var> p) { return sum(hadamard(p[0], hadamard(p[0], t.constant(C)))); }},
      {"scale_affine", [&](Tape&, std::span<const Var> p) { return dot(affine(scale(p[0], 2.5), -1.0, 0.3), p[0]); }},
      {"scale_by", [&](Tape& t, std::span<const Var> p) { return dot(scale_by(p[0], sum(p[0])), t.constant(C)); }},
      {"row_broadcast", [&](Tape& t, std::span<const Var> p) { return dot(add_row_broadcast(p[0], t.constant(row)), p[0]); }},
      {"normalize", [&](Tape& t, std::span<const Var> p) { return dot(row_l2_normalize(p[0]), t.constant(C)); }},
      {"exp_log", [&](Tape&, std::span<const Var> p) { return sum(log(exp(scale(p[0], 0.3)))); }},
      {"log", [&](Tape& t, std::span<const Var> p) { return sum(log(add(hadamard(p[0], p[0]), t.constant(pos)))); }},
      {"sigmoid", [&](Tape& t, std::span<const Var> p) { return dot(sigmoid(p[0]), t.constant(C)); }},
      {"logsumexp", [&](Tape& t, std::span<const Var> p) {
         return dot(logsumexp_over_list(p[0], {{0, 1, 5}, {2, 11, 3, 7}, {4}}), t.constant(Matrix::Ones(3, 1)));
       }},
      {"gather", [&](Tape&, std::span<const Var> p) {
         const std::vector<std::size_t> idx{0, 5, 5, 11};
         return sum(exp(gather(p[0], idx)));
       }},
      {"gather_rows_block", [&](Tape& t, std::span<const Var> p) {
         const std::vector<std::size_t> rows{2, 0, 2};
         return dot(block(gather_rows(p[0], rows), 1, 1, 2, 3), t.constant(Matrix::Constant(2, 3, 0.7)));
       }},
      {"hconcat", [&](Tape& t, std::span<const Var> p) {
         const Var parts[] = {p[0], scale(p[0], 2.0)};
         return dot(hconcat(parts), t.constant(Matrix::Ones(3, 8)));
       }},
      {"rowwise_max", [&](Tape&, std::span<const Var> p) { return sum(exp(rowwise_max_with_index(p[0]).value)); }},
      {"mean_over_rows", [&](Tape& t, std::span<const Var> p) {
         const std::vector<std::size_t> off{0, 1, 3};
         return dot(mean_over_rows(p[0], off), t.constant(Matrix::Constant(2, 4, 1.3))) + sum(mean_over_rows(p[0]));
       }},
      {"euclidean", [&](Tape& t, std::span<const Var> p) { return sum(euclidean_distance(p[0], t.constant(C))); }},
      {"mean", [&](Tape&, std::span<const Var> p) { return mean(hadamard(p[0], p[0])); }},
      {"clamp", [&](Tape&, std::span<const Var> p) { return sum(hadamard(clamp(p[0], -0.5, 0.5), p[0])); }},
  };
  for (const auto& [name, build] : cases) {
    EXPECT_LT(check(build, {A}), 1e-6) << name;
  }
}

TEST(Ops, LinearityOfBackward) {
  std::mt19937_64 rng(5);
  const Matrix w0 = random(3, 3, rng);
  auto grad_of = [&](double a, double b) {
    Tape t;
    Var w = t.parameter(w0);
    Var l1 = sum(exp(w));
    Var l2 = dot(row_l2_normalize(w), w);
    t.backward(add(scale(l1, a), scale(l2, b)));
    return t.grad(w);
  };
  const Matrix g1 = grad_of(1, 0), g2 = grad_of(0, 1), g = grad_of(2.0, -3.0);
  EXPECT_TRUE(g.isApprox(2.0 * g1 - 3.0 * g2, 1e-12));
}

TEST(FiniteDifference, AffineFunctionIsExactToRoundoff) {
  std::mt19937_64 rng(3);
  const Matrix w = random(2, 3, rng), c = random(2, 3, rng);
  const auto r = finite_difference_check(
      [&](Tape& t, std::span<const Var> p) { return add(dot(p[0], t.constant(c)), t.constant(4.0)); }, {w}, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_GT(r.evaluations, 0u);
}

TEST(FiniteDifference, DetectsAWrongGradient) {
  // exp recorded with a deliberately wrong backward rule.
  auto wrong = [](Tape& t, std::span<const Var> p) {
    Var a = p[0];
    Var out = t.record(a.value().array().exp().matrix(), {a.id},
                       [id = a.id](Tape& tape, std::size_t self) { tape.grad_buffer(id) += 2.0 * tape.upstream(self); },
                       "bad_exp");
    return sum(out);
  };
  EXPECT_GT(finite_difference_check(wrong, {Matrix::Zero(1, 2)}, 1e-4).max_rel_error, 0.1);
}
