#include "storyalign/synthetic.hpp"

#include <array>
#include <cstdio>
#include <random>

#include "storyalign/error.hpp"

namespace storyalign {

void SyntheticGenConfig::validate() const {
  if (num_stories < 1 || images_per_story < 1 || sentences_per_article < 1 || articles_per_story < 1 ||
      latent_dim < 1 || text_dim < 1 || image_dim < 1 || entities_per_story < 1) {
    throw Error(ErrorKind::InvalidArgument, "synthetic corpus counts must all be >= 1");
  }
  if (!(noise_scale >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise_scale must be >= 0");
  if (num_heldout > num_stories) throw Error(ErrorKind::InvalidArgument, "num_heldout exceeds num_stories");
}

namespace {

constexpr std::array<const char*, 6> kChannels = {"ap", "bbc", "cnn", "fox-news", "npr", "reuters"};
constexpr std::int64_t kEpochBase = 1600000000;  // 2020-09-13
constexpr std::int64_t kDay = 86400;

std::string pad_id(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
  return buf;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  RowMatrix normal(std::size_t rows, std::size_t cols) {
    RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal_(rng_);
    return m;
  }
  double uniform() { return uniform_(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Eigen::RowVectorXd unit(Eigen::RowVectorXd v) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::RowVectorXd(v / n) : v;
}

}  // namespace

Dataset generate_synthetic_corpus(const SyntheticGenConfig& cfg) {
  cfg.validate();
  Sampler sampler(cfg.seed);

  SyntheticMetadata meta{cfg, sampler.normal(cfg.latent_dim, cfg.text_dim),
                         sampler.normal(cfg.latent_dim, cfg.image_dim)};

  const std::size_t n_sent = cfg.num_stories * cfg.articles_per_story * cfg.sentences_per_article;
  const std::size_t n_img = cfg.num_stories * cfg.images_per_story;
  RowMatrix text(static_cast<Eigen::Index>(n_sent), static_cast<Eigen::Index>(cfg.text_dim));
  RowMatrix images(static_cast<Eigen::Index>(n_img), static_cast<Eigen::Index>(cfg.image_dim));
  std::vector<std::string> text_ids, image_ids;
  text_ids.reserve(n_sent);
  image_ids.reserve(n_img);

  DatasetManifest manifest;
  manifest.text_dim = cfg.text_dim;
  manifest.image_dim = cfg.image_dim;
  manifest.dtype = DType::F64;

  const std::size_t first_heldout = cfg.num_stories - cfg.num_heldout;
  for (std::size_t s = 0; s < cfg.num_stories; ++s) {
    Story story;
    story.story_id = pad_id('s', s);
    story.split = s >= first_heldout ? kTestSplit : kTrainSplit;
    const Eigen::RowVectorXd latent = sampler.normal(1, cfg.latent_dim).row(0);
    const auto day = static_cast<std::int64_t>(sampler.index(28));

    for (std::size_t i = 0; i < cfg.images_per_story; ++i) {
      const Eigen::RowVectorXd z = latent + cfg.noise_scale * sampler.normal(1, cfg.latent_dim).row(0);
      images.row(static_cast<Eigen::Index>(image_ids.size())) = unit(z * meta.image_map);
      std::string id = story.story_id + "-i" + std::to_string(i);
      std::vector<std::string> tags{"news"};
      for (std::size_t e = 0; e < cfg.entities_per_story; ++e) {
        if (sampler.uniform() < 0.5) tags.push_back(story.story_id + "-e" + std::to_string(e));
      }
      manifest.image_tags.emplace(id, std::move(tags));
      story.image_ids.push_back(id);
      image_ids.push_back(std::move(id));
    }

    for (std::size_t a = 0; a < cfg.articles_per_story; ++a) {
      Article article;
      article.article_id = story.story_id + "-a" + std::to_string(a);
      article.channel = kChannels[sampler.index(kChannels.size())];
      article.title = "Synthetic story " + std::to_string(s) + " article " + std::to_string(a);
      article.publication_time =
          kEpochBase + day * kDay + static_cast<std::int64_t>(sampler.index(static_cast<std::size_t>(kDay)));
      for (std::size_t l = 0; l < cfg.sentences_per_article; ++l) {
        const Eigen::RowVectorXd z = latent + cfg.noise_scale * sampler.normal(1, cfg.latent_dim).row(0);
        text.row(static_cast<Eigen::Index>(text_ids.size())) = unit(z * meta.text_map);
        std::string id = article.article_id + "-t" + std::to_string(l);
        article.sentences.push_back(id);
        text_ids.push_back(std::move(id));
      }
      for (std::size_t i = a; i < story.image_ids.size(); i += cfg.articles_per_story) {
        article.image_ids.push_back(story.image_ids[i]);
      }
      story.articles.push_back(std::move(article));
    }
    story.ground_truth_set = story.image_ids;
    manifest.stories.push_back(std::move(story));
  }

  manifest.text_ids = text_ids;
  manifest.image_ids = image_ids;
  manifest.synthetic = std::move(meta);

  Dataset ds;
  ds.text = EmbeddingMatrix(std::move(text), std::move(text_ids));
  ds.images = EmbeddingMatrix(std::move(images), std::move(image_ids));
  ds.manifest = std::move(manifest);
  return ds;
}

}  // namespace storyalign
