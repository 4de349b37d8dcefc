#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "storyalign/diff.hpp"
#include "storyalign/embedding.hpp"

namespace storyalign {

/// sim(.) used by a contrastive term: cosine when `normalize`, raw dot otherwise.
struct SimilarityConfig {
  double temperature = 0.07;
  bool normalize = true;

  void validate() const;
};

/// Cosine or dot product of two vectors. Throws DegenerateInput for a zero
/// vector under normalization and DimensionMismatch for unequal sizes.
double pair_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const SimilarityConfig& cfg);

/// Divides similarities by the temperature: the fixed cfg value, or
/// exp(log_temperature) when a trainable scalar is supplied.
diff::Var temperature_scaled(diff::Var sims, const SimilarityConfig& cfg,
                             std::optional<diff::Var> log_temperature = std::nullopt);

/// InfoNCE with in-batch negatives, averaged over the batch.
///
/// Row b of `text` and row b of `images` form the positive pair. For story b
/// the denominator holds the positive, sim(x_b', y_b) for every other text and
/// sim(x_b, y_b') for every other image. With a single story the loss is 0.
diff::Var infonce_loss(diff::Var text, diff::Var images, const SimilarityConfig& cfg,
                       std::optional<diff::Var> log_temperature = std::nullopt);

/// MIL-NCE: story b owns image rows [image_offsets[b], image_offsets[b+1]).
///
/// The numerator sums exp(sim/τ) over the story's own images and the
/// denominator is the numerator plus every negative term: other texts against
/// each of the story's images, and the story's text against every foreign
/// image. One image per story reproduces infonce_loss bit for bit.
diff::Var milnce_loss(diff::Var text, diff::Var images, std::span<const std::size_t> image_offsets,
                      const SimilarityConfig& cfg, std::optional<diff::Var> log_temperature = std::nullopt);

/// Projected rows of one batch. Story b owns sentence rows
/// [sentence_offsets[b], sentence_offsets[b+1]) and image rows likewise.
/// Negatives for b are exactly the rows of the other stories.
struct BatchTensors {
  diff::Var sentences;
  diff::Var images;
  std::vector<std::size_t> sentence_offsets;
  std::vector<std::size_t> image_offsets;

  std::size_t size() const noexcept { return sentence_offsets.empty() ? 0 : sentence_offsets.size() - 1; }
  diff::Var pooled_text() const;    // B x D, L^f per story
  diff::Var pooled_images() const;  // B x D, I^f per story
  void validate() const;
};

struct MilSimConfig {
  SimilarityConfig sentence{0.07, true};  // image vs. best sentence
  SimilarityConfig article{0.07, false};  // pooled image set vs. pooled article
};

/// MIL-SIM objective, normalised by the batch size:
///
///   (1/B) Σ_b InfoNCE(I_b^f, L_b^f) + (λ/B) Σ_b Σ_i InfoNCE(y_{b,i}, L_b)
///
/// where the sentence-level term scores image i against article b' by
/// max_l sim(x_{b',l}, y_i); the positive is its own article and each other
/// article in the batch contributes its highest-scoring sentence as a negative.
/// With λ = 0 the value is exactly the article-level infonce_loss.
diff::Var milsim_loss(const BatchTensors& batch, double lambda, const MilSimConfig& cfg,
                      std::optional<diff::Var> log_temperature = std::nullopt);

struct SentenceMatch {
  std::size_t index = 0;
  double score = 0.0;
};

/// Best sentence for one image: argmax and max of sim(x_l, y); ties go to the lowest index.
SentenceMatch milsim_sentence_sim(const Eigen::VectorXd& image, const RowMatrix& sentences,
                                  const SimilarityConfig& cfg);

/// Probabilistic (PCME-style) match head.
struct PcmeHead {
  double alpha = 5.0;
  double beta = 5.0;
  std::size_t samples = 7;  // K

  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// (1/K²) Σ_k Σ_k' σ(−α‖z_I^k − z_L^k'‖ + β) for K x D sample matrices.
double pcme_match_prob(const RowMatrix& image_samples, const RowMatrix& text_samples, const PcmeHead& head);

/// Reparameterised draws mean + exp(½ logvar) ⊙ ε. `noise` has rows*samples
/// rows; output row r*samples + k is draw k of input row r.
diff::Var pcme_sample(diff::Var mean, diff::Var log_variance, const diff::Matrix& noise, std::size_t samples);

/// Match probabilities between every image instance and every text instance
/// (n_images x n_texts) from stacked samples laid out as by pcme_sample.
diff::Var pcme_match_probs(diff::Var image_samples, diff::Var text_samples, std::size_t samples, diff::Var alpha,
                           diff::Var beta);

/// Mean over pairs of −log p (matching) or −log(1 − p) (non-matching), with p
/// clamped to [kProbabilityClamp, 1 − kProbabilityClamp]. `matches` is 1/0.
diff::Var soft_contrastive_loss(diff::Var probs, const diff::Matrix& matches);
double soft_contrastive_loss(std::span<const double> probs, std::span<const bool> matches);

/// Mean over images of pair_similarity(text, y_i).
double set_score_single(const Eigen::VectorXd& text, const RowMatrix& images, const SimilarityConfig& cfg);
/// pair_similarity(text, mean of image rows); normalisation applies after pooling.
double set_score_mean_agg(const Eigen::VectorXd& text, const RowMatrix& images, const SimilarityConfig& cfg);

}  // namespace storyalign
