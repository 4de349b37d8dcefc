#include "storyalign/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "storyalign/error.hpp"

namespace storyalign {

using diff::Matrix;
using diff::Var;

void SimilarityConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
  }
}

void PcmeHead::validate() const {
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "PCME alpha must be positive");
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "PCME needs at least one sample");
}

double pair_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const SimilarityConfig& cfg) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "similarity of " + std::to_string(a.size()) + "-d and " + std::to_string(b.size()) + "-d vectors");
  }
  const double d = a.dot(b);
  if (!cfg.normalize) return d;
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorKind::DegenerateInput, "cosine similarity of a zero vector");
  return d / (na * nb);
}

Var temperature_scaled(Var sims, const SimilarityConfig& cfg, std::optional<Var> log_temperature) {
  if (log_temperature) return diff::scale_by(sims, diff::exp(diff::scale(*log_temperature, -1.0)));
  cfg.validate();
  return diff::scale(sims, 1.0 / cfg.temperature);
}

namespace {

Var maybe_normalize(Var v, bool normalize) { return normalize ? diff::row_l2_normalize(v) : v; }

void check_offsets(std::span<const std::size_t> offsets, std::size_t rows, const char* what) {
  if (offsets.size() < 2) throw Error(ErrorKind::EmptyInput, std::string(what) + ": empty batch");
  if (offsets.front() != 0 || offsets.back() != rows) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": offsets do not span the rows");
  }
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    if (offsets[b + 1] <= offsets[b]) throw Error(ErrorKind::EmptyInput, std::string(what) + ": empty row group");
  }
}

// Shared core of InfoNCE and MIL-NCE. `logits` is B x M (texts x images).
Var set_contrastive(Var logits, std::span<const std::size_t> image_offsets) {
  const std::size_t batch = image_offsets.size() - 1;
  const std::size_t m = image_offsets.back();
  std::vector<std::vector<std::size_t>> all(batch), positives(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = image_offsets[b]; j < image_offsets[b + 1]; ++j) positives[b].push_back(b * m + j);
    for (std::size_t j = 0; j < m; ++j) all[b].push_back(b * m + j);
    for (std::size_t other = 0; other < batch; ++other) {
      if (other == b) continue;
      for (std::size_t j = image_offsets[b]; j < image_offsets[b + 1]; ++j) all[b].push_back(other * m + j);
    }
  }
  Var denominators = diff::logsumexp_over_list(logits, all);
  Var numerators = diff::logsumexp_over_list(logits, positives);
  return diff::mean(diff::sub(denominators, numerators));
}

}  // namespace

Var milnce_loss(Var text, Var images, std::span<const std::size_t> image_offsets, const SimilarityConfig& cfg,
                std::optional<Var> log_temperature) {
  check_offsets(image_offsets, static_cast<std::size_t>(images.rows()), "milnce_loss");
  if (static_cast<std::size_t>(text.rows()) != image_offsets.size() - 1) {
    throw Error(ErrorKind::ShapeMismatch, "milnce_loss: one text row per story required");
  }
  Var sims = diff::matmul(maybe_normalize(text, cfg.normalize),
                          diff::transpose(maybe_normalize(images, cfg.normalize)));
  return set_contrastive(temperature_scaled(sims, cfg, log_temperature), image_offsets);
}

Var infonce_loss(Var text, Var images, const SimilarityConfig& cfg, std::optional<Var> log_temperature) {
  if (text.rows() == 0) throw Error(ErrorKind::EmptyInput, "infonce_loss: empty batch");
  if (text.rows() != images.rows()) throw Error(ErrorKind::ShapeMismatch, "infonce_loss: one image per text");
  std::vector<std::size_t> offsets(static_cast<std::size_t>(text.rows()) + 1);
  for (std::size_t b = 0; b < offsets.size(); ++b) offsets[b] = b;
  return milnce_loss(text, images, offsets, cfg, log_temperature);
}

Var BatchTensors::pooled_text() const { return diff::mean_over_rows(sentences, sentence_offsets); }
Var BatchTensors::pooled_images() const { return diff::mean_over_rows(images, image_offsets); }

void BatchTensors::validate() const {
  check_offsets(sentence_offsets, static_cast<std::size_t>(sentences.rows()), "batch sentences");
  check_offsets(image_offsets, static_cast<std::size_t>(images.rows()), "batch images");
  if (sentence_offsets.size() != image_offsets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "batch: sentence and image groups disagree on B");
  }
  if (sentences.cols() != images.cols()) throw Error(ErrorKind::ShapeMismatch, "batch: joint dims differ");
}

Var milsim_loss(const BatchTensors& batch, double lambda, const MilSimConfig& cfg,
                std::optional<Var> log_temperature) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "milsim_loss: lambda must be >= 0");
  batch.validate();

  Var article = infonce_loss(batch.pooled_text(), batch.pooled_images(), cfg.article, log_temperature);
  if (lambda == 0.0) return article;

  const std::size_t B = batch.size();
  const auto n_images = static_cast<Eigen::Index>(batch.images.rows());
  Var x = maybe_normalize(batch.sentences, cfg.sentence.normalize);
  Var y = maybe_normalize(batch.images, cfg.sentence.normalize);
  Var sims = diff::matmul(y, diff::transpose(x));  // images x sentences

  std::vector<Var> best;
  best.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto begin = static_cast<Eigen::Index>(batch.sentence_offsets[b]);
    const auto count = static_cast<Eigen::Index>(batch.sentence_offsets[b + 1]) - begin;
    best.push_back(diff::rowwise_max_with_index(diff::block(sims, 0, begin, n_images, count)).value);
  }
  Var logits = temperature_scaled(diff::hconcat(best), cfg.sentence, log_temperature);  // images x B

  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(n_images));
  std::vector<std::size_t> positives(static_cast<std::size_t>(n_images));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t r = batch.image_offsets[b]; r < batch.image_offsets[b + 1]; ++r) {
      for (std::size_t a = 0; a < B; ++a) rows[r].push_back(r * B + a);
      positives[r] = r * B + b;
    }
  }
  Var per_image = diff::sub(diff::logsumexp_over_list(logits, rows), diff::gather(logits, positives));
  Var sentence_term = diff::scale(diff::sum(per_image), lambda / static_cast<double>(B));
  return diff::add(article, sentence_term);
}

SentenceMatch milsim_sentence_sim(const Eigen::VectorXd& image, const RowMatrix& sentences,
                                  const SimilarityConfig& cfg) {
  if (sentences.rows() == 0) throw Error(ErrorKind::EmptyInput, "milsim_sentence_sim: no sentences");
  SentenceMatch best;
  for (Eigen::Index l = 0; l < sentences.rows(); ++l) {
    const double s = pair_similarity(sentences.row(l).transpose(), image, cfg);
    if (l == 0 || s > best.score) best = {static_cast<std::size_t>(l), s};
  }
  return best;
}

double pcme_match_prob(const RowMatrix& image_samples, const RowMatrix& text_samples, const PcmeHead& head) {
  if (image_samples.rows() == 0 || text_samples.rows() == 0) {
    throw Error(ErrorKind::EmptyInput, "pcme_match_prob needs at least one sample per modality");
  }
  if (image_samples.cols() != text_samples.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "pcme_match_prob: sample dims differ");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < image_samples.rows(); ++i) {
    for (Eigen::Index t = 0; t < text_samples.rows(); ++t) {
      const double d = (image_samples.row(i) - text_samples.row(t)).norm();
      const double z = -head.alpha * d + head.beta;
      total += z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
  }
  return total / static_cast<double>(image_samples.rows() * text_samples.rows());
}

Var pcme_sample(Var mean, Var log_variance, const Matrix& noise, std::size_t samples) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "pcme_sample: samples must be >= 1");
  if (mean.rows() != log_variance.rows() || mean.cols() != log_variance.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "pcme_sample: mean and log-variance shapes differ");
  }
  const auto n = static_cast<std::size_t>(mean.rows());
  if (static_cast<std::size_t>(noise.rows()) != n * samples || noise.cols() != mean.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "pcme_sample: noise must be (rows*samples) x dim");
  }
  std::vector<std::size_t> repeat(n * samples);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < samples; ++k) repeat[r * samples + k] = r;
  }
  diff::Tape& tape = *mean.tape;
  Var stddev = diff::exp(diff::scale(diff::gather_rows(log_variance, repeat), 0.5));
  return diff::add(diff::gather_rows(mean, repeat), diff::hadamard(stddev, tape.constant(noise)));
}

Var pcme_match_probs(Var image_samples, Var text_samples, std::size_t samples, Var alpha, Var beta) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "pcme_match_probs: samples must be >= 1");
  const auto ni = static_cast<std::size_t>(image_samples.rows());
  const auto nt = static_cast<std::size_t>(text_samples.rows());
  if (ni % samples != 0 || nt % samples != 0) {
    throw Error(ErrorKind::ShapeMismatch, "pcme_match_probs: sample rows not a multiple of K");
  }
  diff::Tape& tape = *image_samples.tape;
  Var dist = diff::euclidean_distance(image_samples, text_samples);
  Var shift = diff::scale_by(tape.constant(Matrix::Ones(dist.rows(), dist.cols())), beta);
  Var per_sample = diff::sigmoid(diff::add(diff::scale_by(dist, diff::scale(alpha, -1.0)), shift));

  auto pooling = [samples](std::size_t rows) {
    const auto n = rows / samples;
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      p(static_cast<Eigen::Index>(r / samples), static_cast<Eigen::Index>(r)) = 1.0 / static_cast<double>(samples);
    }
    return p;
  };
  Var left = tape.constant(pooling(ni));
  Var right = tape.constant(Matrix(pooling(nt).transpose()));
  return diff::matmul(diff::matmul(left, per_sample), right);
}

Var soft_contrastive_loss(Var probs, const Matrix& matches) {
  if (probs.rows() != matches.rows() || probs.cols() != matches.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "soft_contrastive_loss: labels and probabilities differ in shape");
  }
  if (probs.value().size() == 0) throw Error(ErrorKind::EmptyInput, "soft_contrastive_loss: no pairs");
  diff::Tape& tape = *probs.tape;
  Var p = diff::clamp(probs, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var m = tape.constant(matches);
  Var not_m = tape.constant(Matrix((1.0 - matches.array()).matrix()));
  Var ll = diff::add(diff::hadamard(m, diff::log(p)), diff::hadamard(not_m, diff::log(diff::affine(p, -1.0, 1.0))));
  return diff::scale(diff::mean(ll), -1.0);
}

double soft_contrastive_loss(std::span<const double> probs, std::span<const bool> matches) {
  if (probs.size() != matches.size()) throw Error(ErrorKind::ShapeMismatch, "soft_contrastive_loss: size mismatch");
  if (probs.empty()) throw Error(ErrorKind::EmptyInput, "soft_contrastive_loss: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += matches[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

double set_score_single(const Eigen::VectorXd& text, const RowMatrix& images, const SimilarityConfig& cfg) {
  if (images.rows() == 0) throw Error(ErrorKind::EmptyInput, "set_score_single: empty image set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < images.rows(); ++i) total += pair_similarity(text, images.row(i).transpose(), cfg);
  return total / static_cast<double>(images.rows());
}

double set_score_mean_agg(const Eigen::VectorXd& text, const RowMatrix& images, const SimilarityConfig& cfg) {
  if (images.rows() == 0) throw Error(ErrorKind::EmptyInput, "set_score_mean_agg: empty image set");
  const Eigen::VectorXd pooled = images.colwise().mean().transpose();
  return pair_similarity(text, pooled, cfg);
}

}  // namespace storyalign
