#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "storyalign/dataset.hpp"
#include "storyalign/diff.hpp"
#include "storyalign/model.hpp"
#include "storyalign/objectives.hpp"

namespace storyalign {

enum class Objective { InfoNCE, MilNCE, Pcme, MilSim };
/// How the InfoNCE baseline forms the image side of a positive pair.
enum class ImagePooling { Single, Mean };

std::string_view to_string(Objective o) noexcept;
Objective parse_objective(std::string_view name);
std::string_view to_string(ImagePooling p) noexcept;
ImagePooling parse_image_pooling(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::MilSim;
  ImagePooling infonce_images = ImagePooling::Single;
  double base_lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 2000;
  std::size_t batch_size = 16;
  double lambda = 0.1;
  std::size_t max_sentences_per_article = 64;
  std::optional<std::size_t> images_per_story_sample;  // nullopt: all images
  std::uint64_t seed = 0;
  std::size_t joint_dim = 0;  // 0: same as the text embedding dim
  double temperature = 0.07;
  bool trainable_temperature = false;
  bool contrastive_normalize = true;  // sim(.) of InfoNCE / MIL-NCE / sentence-level MIL-SIM
  bool article_normalize = false;     // sim(.) of the pooled article-level MIL-SIM term
  std::size_t pcme_samples = 7;
  double pcme_alpha = 5.0;
  double pcme_beta = 5.0;
  std::size_t validate_every = 0;  // 0 disables periodic validation
  std::size_t validation_splits = 5;
  std::size_t validation_size = 50;

  void validate() const;
  /// Large-corpus schedule: lr 1e-5 with a 20k-step warm-up.
  static TrainConfig full_scale();

  /// Objectives that pair an article with one image per story.
  bool single_image() const noexcept {
    return objective == Objective::Pcme ||
           (objective == Objective::InfoNCE && infonce_images == ImagePooling::Single);
  }
  SimilarityConfig contrastive_similarity() const { return {temperature, contrastive_normalize}; }
  MilSimConfig milsim_similarity() const {
    return {{temperature, contrastive_normalize}, {temperature, article_normalize}};
  }
};

std::string train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const std::string& json_text);

/// Linear warm-up then cosine decay:
///   t < W:  base_lr * (t + 1) / W
///   t >= W: base_lr * 0.5 * (1 + cos(pi * (t - W) / (T - W)))
/// Throws InvalidArgument for t > T.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for every parameter of a Model, zero-initialised.
struct OptimizerState {
  AdamHyper hyper;
  std::vector<diff::Matrix> first_moment;
  std::vector<diff::Matrix> second_moment;
  std::size_t step = 0;

  static OptimizerState for_parameters(std::span<const diff::Matrix* const> params);
  /// One bias-corrected Adam update of `params` in place.
  void update(std::span<diff::Matrix* const> params, std::span<const diff::Matrix> grads, double lr);
};

/// Base-embedding rows of one batch; the source Dataset is never modified.
struct BatchInputs {
  RowMatrix sentences;  // ΣN_L x text_dim
  RowMatrix images;     // ΣN_I x image_dim
  std::vector<std::size_t> sentence_offsets;
  std::vector<std::size_t> image_offsets;
  std::vector<std::string> story_ids;
  std::vector<std::string> article_ids;

  std::size_t size() const noexcept { return story_ids.size(); }
};

/// Indices of stories whose split equals `split`.
std::vector<std::size_t> stories_in_split(const DatasetManifest& manifest, std::string_view split);

/// Samples B distinct stories from `story_pool`, one uniform article each
/// (truncated to max_sentences_per_article) and an image subset per config.
BatchInputs build_batch(const Dataset& data, std::span<const std::size_t> story_pool, const TrainConfig& cfg,
                        std::mt19937_64& rng);

/// Standard-normal reparameterisation noise for the probabilistic objective.
struct PcmeNoise {
  diff::Matrix text;   // (B*K) x joint
  diff::Matrix image;  // (B*K) x joint
};
PcmeNoise draw_pcme_noise(std::size_t batch_size, std::size_t samples, std::size_t joint_dim, std::mt19937_64& rng);

/// Records the configured objective for one batch on `tape`.
diff::Var build_objective(diff::Tape& tape, const ModelVars& vars, const BatchInputs& batch, const TrainConfig& cfg,
                          const PcmeNoise* noise);

struct StepResult {
  double loss = 0.0;
  double lr = 0.0;
  std::size_t step = 0;  // index of the step just taken
};

/// Forward and backward pass followed by one Adam update at lr_at(optimizer.step).
/// Throws NonFinite (with the offending step and loss) if the loss is not finite.
StepResult train_step(Model& model, OptimizerState& optimizer, const BatchInputs& batch, const TrainConfig& cfg,
                      std::mt19937_64& rng);

struct ValidationMetrics {
  double r1 = 0.0, r5 = 0.0, r10 = 0.0, median_rank = 0.0;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<ValidationMetrics> validation;
};

/// Everything needed to continue a run bit-identically.
struct TrainState {
  TrainConfig config;
  Model model;
  OptimizerState optimizer;
  std::mt19937_64 rng;
  std::size_t text_dim = 0;
  std::size_t image_dim = 0;
};

TrainState init_train_state(const Dataset& data, const TrainConfig& cfg);

using TrainLogger = std::function<void(const TrainLogEntry&)>;

/// Runs steps until optimizer.step reaches `until_step` (clamped to total_steps).
/// Batches come from the train split (every story when no story is tagged train).
std::vector<TrainLogEntry> train_loop(const Dataset& data, TrainState& state, std::size_t until_step,
                                      const TrainLogger& logger = {});

/// Averages R@K over `validation_splits` random subsets of the training stories.
ValidationMetrics validate_on_training_splits(const Dataset& data, const TrainState& state, std::uint64_t seed);

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& dir);

}  // namespace storyalign
