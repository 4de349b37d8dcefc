#include "storyalign/model.hpp"

#include <cmath>

#include "storyalign/error.hpp"

namespace storyalign {

RowMatrix ProjectionHead::apply(const RowMatrix& base) const {
  if (static_cast<std::size_t>(base.cols()) != input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "projection expects " + std::to_string(input_dim()) +
                                                  "-d input, got " + std::to_string(base.cols()));
  }
  RowMatrix out = base * weight;
  out.rowwise() += bias.row(0);
  return out;
}

diff::Var ProjectionHead::apply(diff::Var base, diff::Var weight_var, diff::Var bias_var) const {
  return diff::add_row_broadcast(diff::matmul(base, weight_var), bias_var);
}

ProjectionHead ProjectionHead::identity(std::size_t dim, Modality modality) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {modality, diff::Matrix::Identity(d, d), diff::Matrix::Zero(1, d)};
}

ProjectionHead ProjectionHead::xavier(std::size_t in, std::size_t out, Modality modality, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  diff::Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
  // Row-major fill keeps the draw order independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
  return {modality, std::move(w), diff::Matrix::Zero(1, static_cast<Eigen::Index>(out))};
}

ProjectionHead ProjectionHead::initial(std::size_t in, std::size_t out, Modality modality, std::mt19937_64& rng) {
  return in == out ? identity(in, modality) : xavier(in, out, modality, rng);
}

std::vector<diff::Matrix*> Model::parameters() {
  std::vector<diff::Matrix*> ps{&text.weight, &text.bias, &image.weight, &image.bias};
  if (pcme) {
    for (auto* p : {&pcme->text_log_variance.weight, &pcme->text_log_variance.bias, &pcme->image_log_variance.weight,
                    &pcme->image_log_variance.bias, &pcme->alpha, &pcme->beta}) {
      ps.push_back(p);
    }
  }
  ps.push_back(&log_temperature);
  return ps;
}

std::vector<const diff::Matrix*> Model::parameters() const {
  auto mutable_ps = const_cast<Model*>(this)->parameters();
  return {mutable_ps.begin(), mutable_ps.end()};
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names{"text.weight", "text.bias", "image.weight", "image.bias"};
  if (pcme) {
    for (const char* n : {"text_logvar.weight", "text_logvar.bias", "image_logvar.weight", "image_logvar.bias",
                          "pcme.alpha", "pcme.beta"}) {
      names.emplace_back(n);
    }
  }
  names.emplace_back("log_temperature");
  return names;
}

Eigen::VectorXd Model::article_vector(const RowMatrix& sentence_base) const {
  if (sentence_base.rows() == 0) throw Error(ErrorKind::EmptyInput, "article has no sentences");
  return text.apply(sentence_base).colwise().mean().transpose();
}

RowMatrix Model::project_images(const RowMatrix& image_base) const { return image.apply(image_base); }

ModelVars ModelVars::bind(std::span<const diff::Var> vars, bool has_pcme) {
  const std::size_t expected = has_pcme ? 11 : 5;
  if (vars.size() != expected) throw Error(ErrorKind::InvalidArgument, "parameter count does not match model");
  ModelVars mv{vars[0], vars[1], vars[2], vars[3], {}, {}, {}, {}, {}, {}, vars.back()};
  if (has_pcme) {
    mv.text_lv_weight = vars[4];
    mv.text_lv_bias = vars[5];
    mv.image_lv_weight = vars[6];
    mv.image_lv_bias = vars[7];
    mv.alpha = vars[8];
    mv.beta = vars[9];
  }
  return mv;
}

namespace {

PcmeParams make_pcme(std::size_t text_dim, std::size_t image_dim, std::size_t joint_dim) {
  // Zero weights with a bias of log(0.01): every instance starts as N(mu, 0.1² I).
  auto head = [joint_dim](std::size_t in, Modality m) {
    return ProjectionHead{m, diff::Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(joint_dim)),
                          diff::Matrix::Constant(1, static_cast<Eigen::Index>(joint_dim), std::log(0.01))};
  };
  return PcmeParams{head(text_dim, Modality::Text), head(image_dim, Modality::Image)};
}

}  // namespace

Model make_model(std::size_t text_dim, std::size_t image_dim, std::size_t joint_dim, bool with_pcme,
                 double temperature, std::uint64_t seed) {
  if (text_dim == 0 || image_dim == 0 || joint_dim == 0) {
    throw Error(ErrorKind::InvalidArgument, "model dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  Model m{ProjectionHead::initial(text_dim, joint_dim, Modality::Text, rng),
          ProjectionHead::initial(image_dim, joint_dim, Modality::Image, rng), std::nullopt,
          diff::Matrix::Constant(1, 1, std::log(temperature))};
  if (with_pcme) m.pcme = make_pcme(text_dim, image_dim, joint_dim);
  return m;
}

Model make_random_model(std::size_t text_dim, std::size_t image_dim, std::size_t joint_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m;
  m.text = ProjectionHead::xavier(text_dim, joint_dim, Modality::Text, rng);
  m.image = ProjectionHead::xavier(image_dim, joint_dim, Modality::Image, rng);
  return m;
}

}  // namespace storyalign
