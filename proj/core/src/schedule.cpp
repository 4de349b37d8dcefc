#include <cmath>
#include <numbers>

#include "json_util.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign {

std::string_view to_string(Objective o) noexcept {
  switch (o) {
    case Objective::InfoNCE: return "infonce";
    case Objective::MilNCE: return "milnce";
    case Objective::Pcme: return "pcme";
    case Objective::MilSim: return "milsim";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  if (name == "infonce") return Objective::InfoNCE;
  if (name == "milnce") return Objective::MilNCE;
  if (name == "pcme") return Objective::Pcme;
  if (name == "milsim") return Objective::MilSim;
  throw Error(ErrorKind::InvalidArgument, "unknown objective '" + std::string(name) + "'");
}

std::string_view to_string(ImagePooling p) noexcept { return p == ImagePooling::Single ? "single" : "mean"; }

ImagePooling parse_image_pooling(std::string_view name) {
  if (name == "single") return ImagePooling::Single;
  if (name == "mean") return ImagePooling::Mean;
  throw Error(ErrorKind::InvalidArgument, "unknown image pooling '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw Error(ErrorKind::InvalidArgument, "base_lr must be positive");
  if (warmup_steps > total_steps) throw Error(ErrorKind::InvalidArgument, "warmup_steps exceeds total_steps");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be >= 0");
  if (max_sentences_per_article < 1) throw Error(ErrorKind::InvalidArgument, "max_sentences_per_article must be >= 1");
  if (images_per_story_sample && *images_per_story_sample < 1) {
    throw Error(ErrorKind::InvalidArgument, "images_per_story_sample must be >= 1");
  }
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
  if (pcme_samples < 1) throw Error(ErrorKind::InvalidArgument, "pcme_samples must be >= 1");
  if (!(pcme_alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "pcme_alpha must be positive");
  if (validation_splits < 1) throw Error(ErrorKind::InvalidArgument, "validation_splits must be >= 1");
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig cfg;
  cfg.base_lr = 1e-5;
  cfg.warmup_steps = 20000;
  cfg.total_steps = 200000;
  cfg.validation_size = 1000;
  return cfg;
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::json j{{"objective", std::string(to_string(c.objective))},
                   {"infonce_images", std::string(to_string(c.infonce_images))},
                   {"base_lr", c.base_lr},
                   {"warmup_steps", c.warmup_steps},
                   {"total_steps", c.total_steps},
                   {"batch_size", c.batch_size},
                   {"lambda", c.lambda},
                   {"max_sentences_per_article", c.max_sentences_per_article},
                   {"seed", c.seed},
                   {"joint_dim", c.joint_dim},
                   {"temperature", c.temperature},
                   {"trainable_temperature", c.trainable_temperature},
                   {"contrastive_normalize", c.contrastive_normalize},
                   {"article_normalize", c.article_normalize},
                   {"pcme_samples", c.pcme_samples},
                   {"pcme_alpha", c.pcme_alpha},
                   {"pcme_beta", c.pcme_beta},
                   {"validate_every", c.validate_every},
                   {"validation_splits", c.validation_splits},
                   {"validation_size", c.validation_size}};
  if (c.images_per_story_sample) {
    j["images_per_story_sample"] = *c.images_per_story_sample;
  } else {
    j["images_per_story_sample"] = "all";
  }
  return j.dump(1);
}

TrainConfig train_config_from_json(const std::string& json_text) {
  const auto j = detail::parse_json(json_text, "train config");
  TrainConfig c;
  try {
    if (auto it = j.find("objective"); it != j.end()) c.objective = parse_objective(it->get<std::string>());
    if (auto it = j.find("infonce_images"); it != j.end()) {
      c.infonce_images = parse_image_pooling(it->get<std::string>());
    }
    c.base_lr = detail::get_or(j, "base_lr", c.base_lr);
    c.warmup_steps = detail::get_or(j, "warmup_steps", c.warmup_steps);
    c.total_steps = detail::get_or(j, "total_steps", c.total_steps);
    c.batch_size = detail::get_or(j, "batch_size", c.batch_size);
    c.lambda = detail::get_or(j, "lambda", c.lambda);
    c.max_sentences_per_article = detail::get_or(j, "max_sentences_per_article", c.max_sentences_per_article);
    if (auto it = j.find("images_per_story_sample"); it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "all") {
          throw Error(ErrorKind::InvalidArgument, "images_per_story_sample must be a count or \"all\"");
        }
        c.images_per_story_sample.reset();
      } else {
        c.images_per_story_sample = it->get<std::size_t>();
      }
    }
    c.seed = detail::get_or(j, "seed", c.seed);
    c.joint_dim = detail::get_or(j, "joint_dim", c.joint_dim);
    c.temperature = detail::get_or(j, "temperature", c.temperature);
    c.trainable_temperature = detail::get_or(j, "trainable_temperature", c.trainable_temperature);
    c.contrastive_normalize = detail::get_or(j, "contrastive_normalize", c.contrastive_normalize);
    c.article_normalize = detail::get_or(j, "article_normalize", c.article_normalize);
    c.pcme_samples = detail::get_or(j, "pcme_samples", c.pcme_samples);
    c.pcme_alpha = detail::get_or(j, "pcme_alpha", c.pcme_alpha);
    c.pcme_beta = detail::get_or(j, "pcme_beta", c.pcme_beta);
    c.validate_every = detail::get_or(j, "validate_every", c.validate_every);
    c.validation_splits = detail::get_or(j, "validation_splits", c.validation_splits);
    c.validation_size = detail::get_or(j, "validation_size", c.validation_size);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("train config: ") + e.what());
  }
  return c;
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
  const std::size_t warmup = cfg.warmup_steps;
  const std::size_t total = cfg.total_steps;
  if (step > total) {
    throw Error(ErrorKind::InvalidArgument,
                "step " + std::to_string(step) + " is past total_steps " + std::to_string(total));
  }
  if (step < warmup) return cfg.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total == warmup) return step == total ? 0.0 : cfg.base_lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

OptimizerState OptimizerState::for_parameters(std::span<const diff::Matrix* const> params) {
  OptimizerState s;
  for (const auto* p : params) {
    s.first_moment.push_back(diff::Matrix::Zero(p->rows(), p->cols()));
    s.second_moment.push_back(diff::Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void OptimizerState::update(std::span<diff::Matrix* const> params, std::span<const diff::Matrix> grads, double lr) {
  if (params.size() != first_moment.size() || grads.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() || first_moment[i].rows() != p.rows() ||
        first_moment[i].cols() != p.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "gradient " + std::to_string(i) + " does not match its parameter");
    }
  }
  ++step;
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = first_moment[i];
    auto& v = second_moment[i];
    const auto& g = grads[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.cwiseProduct(g);
    params[i]->array() -=
        lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + hyper.eps);
  }
}

}  // namespace storyalign
