#include <cmath>
#include <algorithm>
#include <numeric>
#include <utility>

#include "storyalign/error.hpp"
#include "storyalign/retrieval_eval.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign {

using diff::Var;

namespace {

diff::Matrix to_dense(const RowMatrix& m) { return diff::Matrix(m); }

}  // namespace

Var build_objective(diff::Tape& tape, const ModelVars& vars, const BatchInputs& batch, const TrainConfig& cfg,
                    const PcmeNoise* noise) {
  Var sentence_base = tape.constant(to_dense(batch.sentences));
  Var image_base = tape.constant(to_dense(batch.images));
  Var text = diff::add_row_broadcast(diff::matmul(sentence_base, vars.text_weight), vars.text_bias);
  Var images = diff::add_row_broadcast(diff::matmul(image_base, vars.image_weight), vars.image_bias);
  const std::optional<Var> log_tau =
      cfg.trainable_temperature ? std::optional<Var>(vars.log_temperature) : std::nullopt;

  switch (cfg.objective) {
    case Objective::InfoNCE: {
      Var pooled_text = diff::mean_over_rows(text, batch.sentence_offsets);
      Var image_side = cfg.infonce_images == ImagePooling::Mean ? diff::mean_over_rows(images, batch.image_offsets)
                                                                 : images;
      return infonce_loss(pooled_text, image_side, cfg.contrastive_similarity(), log_tau);
    }
    case Objective::MilNCE:
      return milnce_loss(diff::mean_over_rows(text, batch.sentence_offsets), images, batch.image_offsets,
                         cfg.contrastive_similarity(), log_tau);
    case Objective::Pcme: {
      if (!vars.alpha || noise == nullptr) {
        throw Error(ErrorKind::InvalidArgument, "probabilistic objective needs variance heads and noise");
      }
      if (images.rows() != static_cast<Eigen::Index>(batch.size())) {
        throw Error(ErrorKind::ShapeMismatch, "probabilistic objective pairs one image with each article");
      }
      Var text_mu = diff::mean_over_rows(text, batch.sentence_offsets);
      Var text_lv = diff::mean_over_rows(
          diff::add_row_broadcast(diff::matmul(sentence_base, *vars.text_lv_weight), *vars.text_lv_bias),
          batch.sentence_offsets);
      Var image_lv = diff::add_row_broadcast(diff::matmul(image_base, *vars.image_lv_weight), *vars.image_lv_bias);
      Var text_samples = pcme_sample(text_mu, text_lv, noise->text, cfg.pcme_samples);
      Var image_samples = pcme_sample(images, image_lv, noise->image, cfg.pcme_samples);
      Var probs = pcme_match_probs(image_samples, text_samples, cfg.pcme_samples, *vars.alpha, *vars.beta);
      const auto B = static_cast<Eigen::Index>(batch.size());
      return soft_contrastive_loss(probs, diff::Matrix::Identity(B, B));
    }
    case Objective::MilSim: {
      BatchTensors tensors{text, images, batch.sentence_offsets, batch.image_offsets};
      return milsim_loss(tensors, cfg.lambda, cfg.milsim_similarity(), log_tau);
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unhandled objective");
}

StepResult train_step(Model& model, OptimizerState& optimizer, const BatchInputs& batch, const TrainConfig& cfg,
                      std::mt19937_64& rng) {
  std::optional<PcmeNoise> noise;
  if (cfg.objective == Objective::Pcme) {
    noise = draw_pcme_noise(batch.size(), cfg.pcme_samples, model.joint_dim(), rng);
  }

  auto params = model.parameters();
  diff::Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (auto* p : params) leaves.push_back(tape.parameter(*p));
  const ModelVars vars = ModelVars::bind(leaves, model.pcme.has_value());

  Var loss = build_objective(tape, vars, batch, cfg, noise ? &*noise : nullptr);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::NonFinite, "loss is " + std::to_string(value) + " at step " +
                                          std::to_string(optimizer.step) + " (objective " +
                                          std::string(to_string(cfg.objective)) + ")");
  }
  tape.backward(loss);
  std::vector<diff::Matrix> grads;
  grads.reserve(leaves.size());
  for (auto v : leaves) grads.push_back(tape.grad(v));

  StepResult result{value, lr_at(optimizer.step, cfg), optimizer.step};
  optimizer.update(params, grads, result.lr);
  return result;
}

TrainState init_train_state(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t text_dim = data.text.dim();
  const std::size_t image_dim = data.images.dim();
  const std::size_t joint = cfg.joint_dim == 0 ? text_dim : cfg.joint_dim;

  // Separate stream for initialisation so the batch sequence depends only on the seed.
  Model model = make_model(text_dim, image_dim, joint, cfg.objective == Objective::Pcme, cfg.temperature,
                           cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  if (model.pcme) {
    model.pcme->alpha(0, 0) = cfg.pcme_alpha;
    model.pcme->beta(0, 0) = cfg.pcme_beta;
  }
  OptimizerState optimizer = OptimizerState::for_parameters(std::as_const(model).parameters());
  return TrainState{cfg, std::move(model), std::move(optimizer), std::mt19937_64(cfg.seed), text_dim, image_dim};
}

namespace {

std::vector<std::size_t> training_pool(const Dataset& data) {
  auto pool = stories_in_split(data.manifest, kTrainSplit);
  if (pool.empty()) {
    pool.resize(data.manifest.stories.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
  return pool;
}

}  // namespace

std::vector<TrainLogEntry> train_loop(const Dataset& data, TrainState& state, std::size_t until_step,
                                      const TrainLogger& logger) {
  const TrainConfig& cfg = state.config;
  const auto pool = training_pool(data);
  const std::size_t stop = std::min(until_step, cfg.total_steps);

  std::vector<TrainLogEntry> log;
  while (state.optimizer.step < stop) {
    BatchInputs batch = build_batch(data, pool, cfg, state.rng);
    const StepResult r = train_step(state.model, state.optimizer, batch, cfg, state.rng);
    TrainLogEntry entry{r.step, r.loss, r.lr, std::nullopt};
    if (cfg.validate_every > 0 && state.optimizer.step % cfg.validate_every == 0) {
      entry.validation = validate_on_training_splits(data, state, cfg.seed + state.optimizer.step);
    }
    if (logger) logger(entry);
    log.push_back(std::move(entry));
  }
  return log;
}

ValidationMetrics validate_on_training_splits(const Dataset& data, const TrainState& state, std::uint64_t seed) {
  const auto pool = training_pool(data);
  const TrainConfig& cfg = state.config;
  const std::size_t size = std::min(cfg.validation_size, pool.size());
  std::mt19937_64 rng(seed);

  EvalOptions opts;
  opts.protocol = EvalProtocol::full();
  opts.scorer = default_scorer(cfg);
  opts.similarity = scoring_similarity(cfg, opts.scorer);

  ValidationMetrics avg;
  for (std::size_t s = 0; s < cfg.validation_splits; ++s) {
    std::vector<std::size_t> subset(pool.begin(), pool.end());
    std::shuffle(subset.begin(), subset.end(), rng);
    subset.resize(size);
    std::sort(subset.begin(), subset.end());
    const auto report = evaluate_stories(data, subset, state.model, opts);
    avg.r1 += report.r1();
    avg.r5 += report.r5();
    avg.r10 += report.r10();
    avg.median_rank += static_cast<double>(report.median_rank());
  }
  const double n = static_cast<double>(cfg.validation_splits);
  avg.r1 /= n;
  avg.r5 /= n;
  avg.r10 /= n;
  avg.median_rank /= n;
  return avg;
}

}  // namespace storyalign
