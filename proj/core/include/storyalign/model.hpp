#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "storyalign/diff.hpp"
#include "storyalign/embedding.hpp"

namespace storyalign {

enum class Modality { Text, Image };

/// Trainable affine map from a frozen base space into the joint space.
struct ProjectionHead {
  Modality modality = Modality::Text;
  diff::Matrix weight;  // input_dim x output_dim
  diff::Matrix bias;    // 1 x output_dim

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weight.rows()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(weight.cols()); }

  /// base * weight + bias for every row.
  RowMatrix apply(const RowMatrix& base) const;
  /// Recorded version for training.
  diff::Var apply(diff::Var base, diff::Var weight_var, diff::Var bias_var) const;

  static ProjectionHead identity(std::size_t dim, Modality modality);
  /// Uniform in ±sqrt(6 / (in + out)), zero bias.
  static ProjectionHead xavier(std::size_t in, std::size_t out, Modality modality, std::mt19937_64& rng);
  /// Identity when in == out, Xavier otherwise.
  static ProjectionHead initial(std::size_t in, std::size_t out, Modality modality, std::mt19937_64& rng);
};

/// Extra parameters of the probabilistic objective.
struct PcmeParams {
  ProjectionHead text_log_variance;
  ProjectionHead image_log_variance;
  diff::Matrix alpha = diff::Matrix::Constant(1, 1, 5.0);
  diff::Matrix beta = diff::Matrix::Constant(1, 1, 5.0);
};

/// Every learned quantity. The base embeddings are not part of the model.
struct Model {
  ProjectionHead text;
  ProjectionHead image;
  std::optional<PcmeParams> pcme;
  diff::Matrix log_temperature = diff::Matrix::Constant(1, 1, std::log(0.07));

  std::size_t joint_dim() const noexcept { return text.output_dim(); }

  /// Canonical parameter order, used by the optimizer and by checkpoints:
  /// text.weight, text.bias, image.weight, image.bias, [text_logvar.weight,
  /// text_logvar.bias, image_logvar.weight, image_logvar.bias, alpha, beta], log_temperature.
  std::vector<diff::Matrix*> parameters();
  std::vector<const diff::Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;

  /// Mean of the projected sentence rows.
  Eigen::VectorXd article_vector(const RowMatrix& sentence_base) const;
  RowMatrix project_images(const RowMatrix& image_base) const;
};

/// Parameter leaves of a Model recorded on one tape, in canonical order.
struct ModelVars {
  diff::Var text_weight, text_bias, image_weight, image_bias;
  std::optional<diff::Var> text_lv_weight, text_lv_bias, image_lv_weight, image_lv_bias, alpha, beta;
  diff::Var log_temperature;

  /// Binds the leaves produced for Model::parameters() (same order and count).
  static ModelVars bind(std::span<const diff::Var> vars, bool has_pcme);
};

Model make_model(std::size_t text_dim, std::size_t image_dim, std::size_t joint_dim, bool with_pcme,
                 double temperature, std::uint64_t seed);
/// Both heads Xavier-initialised regardless of dimensions.
Model make_random_model(std::size_t text_dim, std::size_t image_dim, std::size_t joint_dim, std::uint64_t seed);

}  // namespace storyalign
