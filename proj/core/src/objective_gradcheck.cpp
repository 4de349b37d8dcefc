#include <algorithm>
#include <cmath>
#include <utility>
#include <random>

#include "storyalign/gradcheck.hpp"

namespace storyalign {

namespace {

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void fill_normal(diff::Matrix& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = n(rng);
}

RowMatrix random_rows(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  diff::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  fill_normal(m, rng, 1.0);
  return RowMatrix(m);
}

}  // namespace

GradCheckCase make_gradcheck_case(Objective objective, std::mt19937_64& rng) {
  const std::size_t B = 3;
  const std::size_t text_dim = uniform(rng, 4, 7);
  const std::size_t image_dim = uniform(rng, 4, 7);
  const std::size_t joint = uniform(rng, 3, 5);

  TrainConfig cfg;
  cfg.objective = objective;
  cfg.batch_size = B;
  cfg.joint_dim = joint;
  cfg.trainable_temperature = true;
  cfg.temperature = 0.5;
  cfg.lambda = 0.7;
  cfg.pcme_samples = 3;
  cfg.article_normalize = false;

  const bool one_image = cfg.single_image();
  BatchInputs batch;
  batch.sentence_offsets.push_back(0);
  batch.image_offsets.push_back(0);
  for (std::size_t b = 0; b < B; ++b) {
    batch.sentence_offsets.push_back(batch.sentence_offsets.back() + uniform(rng, 1, 4));
    batch.image_offsets.push_back(batch.image_offsets.back() + (one_image ? 1 : uniform(rng, 1, 3)));
    batch.story_ids.push_back("g" + std::to_string(b));
    batch.article_ids.push_back("g" + std::to_string(b) + "-a0");
  }
  batch.sentences = random_rows(batch.sentence_offsets.back(), text_dim, rng);
  batch.images = random_rows(batch.image_offsets.back(), image_dim, rng);

  Model model = make_random_model(text_dim, image_dim, joint, rng());
  fill_normal(model.text.bias, rng, 0.1);
  fill_normal(model.image.bias, rng, 0.1);
  model.log_temperature(0, 0) = std::log(cfg.temperature);
  if (objective == Objective::Pcme) {
    PcmeParams p;
    p.text_log_variance = ProjectionHead::xavier(text_dim, joint, Modality::Text, rng);
    p.image_log_variance = ProjectionHead::xavier(image_dim, joint, Modality::Image, rng);
    p.text_log_variance.weight *= 0.3;
    p.image_log_variance.weight *= 0.3;
    p.text_log_variance.bias = diff::Matrix::Constant(1, static_cast<Eigen::Index>(joint), -2.0);
    p.image_log_variance.bias = diff::Matrix::Constant(1, static_cast<Eigen::Index>(joint), -2.0);
    p.alpha(0, 0) = 2.0;
    p.beta(0, 0) = 1.5;
    model.pcme = std::move(p);
  }
  PcmeNoise noise = draw_pcme_noise(B, cfg.pcme_samples, joint, rng);
  return GradCheckCase{std::move(batch), std::move(model), std::move(cfg), std::move(noise)};
}

std::vector<ObjectiveGradCheck> run_gradcheck(const GradCheckOptions& opts) {
  struct Target {
    const char* name;
    Objective objective;
  };
  const Target targets[] = {{"infonce", Objective::InfoNCE},
                            {"milnce", Objective::MilNCE},
                            {"soft_contrastive", Objective::Pcme},
                            {"milsim", Objective::MilSim}};

  std::vector<ObjectiveGradCheck> out;
  std::mt19937_64 rng(opts.seed);
  for (const auto& t : targets) {
    ObjectiveGradCheck res;
    res.name = t.name;
    for (std::size_t i = 0; i < opts.batches; ++i) {
      GradCheckCase c = make_gradcheck_case(t.objective, rng);
      std::vector<diff::Matrix> values;
      for (const auto* p : std::as_const(c.model).parameters()) values.push_back(*p);
      const bool has_pcme = c.model.pcme.has_value();
      auto build = [&](diff::Tape& tape, std::span<const diff::Var> leaves) {
        return build_objective(tape, ModelVars::bind(leaves, has_pcme), c.batch, c.config, &c.noise);
      };
      const auto r = diff::finite_difference_check(build, values, opts.step);
      res.evaluations += r.evaluations;
      ++res.batches;
      if (r.max_rel_error >= res.max_rel_error) {
        res.max_rel_error = r.max_rel_error;
        res.worst_parameter = c.model.parameter_names()[r.worst_param];
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace storyalign
