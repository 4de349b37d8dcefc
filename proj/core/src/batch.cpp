#include <algorithm>
#include <numeric>

#include "storyalign/error.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign {

std::vector<std::size_t> stories_in_split(const DatasetManifest& manifest, std::string_view split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.stories.size(); ++i) {
    if (manifest.stories[i].split == split) out.push_back(i);
  }
  return out;
}

namespace {

// First `count` entries of a Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

BatchInputs build_batch(const Dataset& data, std::span<const std::size_t> story_pool, const TrainConfig& cfg,
                        std::mt19937_64& rng) {
  const std::size_t B = cfg.batch_size;
  if (story_pool.size() < B) {
    throw Error(ErrorKind::Insufficient, "batch of " + std::to_string(B) + " needs more than " +
                                             std::to_string(story_pool.size()) + " stories");
  }
  const auto chosen = sample_without_replacement(story_pool.size(), B, rng);

  BatchInputs batch;
  batch.sentence_offsets.push_back(0);
  batch.image_offsets.push_back(0);
  std::vector<std::string> sentence_ids, image_ids;

  for (auto pick : chosen) {
    const Story& story = data.manifest.stories.at(story_pool[pick]);
    if (story.articles.empty()) {
      throw Error(ErrorKind::EmptyInput, "story '" + story.story_id + "' has no articles");
    }
    if (story.image_ids.empty()) {
      throw Error(ErrorKind::EmptyInput, "story '" + story.story_id + "' has no usable images");
    }
    std::uniform_int_distribution<std::size_t> pick_article(0, story.articles.size() - 1);
    const Article& article = story.articles[pick_article(rng)];
    if (article.sentences.empty()) {
      throw Error(ErrorKind::EmptyInput, "article '" + article.article_id + "' has no sentences");
    }
    const std::size_t n_sent = std::min(article.sentences.size(), cfg.max_sentences_per_article);
    sentence_ids.insert(sentence_ids.end(), article.sentences.begin(),
                        article.sentences.begin() + static_cast<std::ptrdiff_t>(n_sent));

    const std::size_t n_images = story.image_ids.size();
    std::size_t want = cfg.single_image() ? 1 : cfg.images_per_story_sample.value_or(n_images);
    if (want >= n_images) {
      image_ids.insert(image_ids.end(), story.image_ids.begin(), story.image_ids.end());
      want = n_images;
    } else {
      auto subset = sample_without_replacement(n_images, want, rng);
      std::sort(subset.begin(), subset.end());
      for (auto i : subset) image_ids.push_back(story.image_ids[i]);
    }

    batch.sentence_offsets.push_back(batch.sentence_offsets.back() + n_sent);
    batch.image_offsets.push_back(batch.image_offsets.back() + want);
    batch.story_ids.push_back(story.story_id);
    batch.article_ids.push_back(article.article_id);
  }

  batch.sentences = data.text.gather(sentence_ids);
  batch.images = data.images.gather(image_ids);
  return batch;
}

PcmeNoise draw_pcme_noise(std::size_t batch_size, std::size_t samples, std::size_t joint_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    diff::Matrix m(static_cast<Eigen::Index>(batch_size * samples), static_cast<Eigen::Index>(joint_dim));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
    }
    return m;
  };
  PcmeNoise noise;
  noise.text = draw();
  noise.image = draw();
  return noise;
}

}  // namespace storyalign
