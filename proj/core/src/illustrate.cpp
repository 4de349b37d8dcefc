#include "storyalign/illustrate.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "storyalign/combinations.hpp"
#include "storyalign/error.hpp"
#include "storyalign/text.hpp"

namespace storyalign {

TagIndexLookup::TagIndexLookup(const std::map<std::string, std::vector<std::string>>& image_tags) {
  for (const auto& [image, tags] : image_tags)
    for (const auto& t : tags) by_tag_[to_lower_ascii(t)].push_back(image);
  for (auto& [tag, ids] : by_tag_) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
}

std::vector<std::string> TagIndexLookup::lookup(const std::string& entity, std::size_t m) const {
  auto it = by_tag_.find(to_lower_ascii(entity));
  if (it == by_tag_.end()) return {};
  const auto n = std::min(m, it->second.size());
  return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

CandidatePool candidate_pool_from_entities(std::span<const std::string> entities, const ImageLookup& lookup,
                                           std::size_t m) {
  if (entities.empty()) throw Error(ErrorKind::InvalidArgument, "no entities to look up");
  CandidatePool out;
  std::unordered_set<std::string> seen;
  for (const auto& e : entities) {
    std::vector<std::string> found;
    try {
      found = lookup.lookup(e, m);
    } catch (const std::exception& ex) {
      throw Error(ErrorKind::Provider, "image lookup failed for '" + e + "': " + ex.what());
    }
    if (found.size() > m) found.resize(m);
    for (const auto& id : found)
      if (seen.insert(id).second) out.pool.push_back(id);
    out.per_entity[e] = std::move(found);
  }
  if (out.pool.empty()) throw Error(ErrorKind::EmptyInput, "no candidate images for the given entities");
  return out;
}

ImageSetChoice best_image_set(const Eigen::VectorXd& article, std::span<const std::string> pool_ids,
                              const RowMatrix& projected, const BestSetOptions& opts) {
  if (static_cast<std::size_t>(projected.rows()) != pool_ids.size()) {
    throw Error(ErrorKind::RowCountMismatch, "pool has " + std::to_string(pool_ids.size()) + " ids but " +
                                                 std::to_string(projected.rows()) + " rows");
  }
  if (pool_ids.size() < opts.set_size) {
    throw Error(ErrorKind::Insufficient, "pool of " + std::to_string(pool_ids.size()) +
                                             " images is smaller than the set size " +
                                             std::to_string(opts.set_size));
  }
  std::vector<std::size_t> order(pool_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pool_ids[a] < pool_ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (pool_ids[order[i]] == pool_ids[order[i - 1]]) {
      throw Error(ErrorKind::DuplicateId, "duplicate pool image " + pool_ids[order[i]]);
    }
  }
  RowMatrix rows(projected.rows(), projected.cols());
  for (std::size_t i = 0; i < order.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = projected.row(static_cast<Eigen::Index>(order[i]));

  const SetScoreFn scorer = make_set_scorer(opts.scorer, opts.similarity);
  auto score = [&](std::span<const std::size_t> combo) {
    RowMatrix chosen(static_cast<Eigen::Index>(combo.size()), rows.cols());
    for (std::size_t i = 0; i < combo.size(); ++i) chosen.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(combo[i]));
    return scorer(article, chosen);
  };
  const auto best = best_combination(order.size(), opts.set_size, opts.budget, opts.seed, score, opts.threads);

  ImageSetChoice out;
  for (auto i : best.indices) out.ids.push_back(pool_ids[order[i]]);
  out.score = best.score;
  out.evaluated = best.evaluated;
  out.exhaustive = best.exhaustive;
  return out;
}

ImageSetChoice best_image_set(const Eigen::VectorXd& article, const CandidatePool& pool, const EmbeddingMatrix& images,
                              const Model& model, const BestSetOptions& opts) {
  return best_image_set(article, pool.pool, model.project_images(images.gather(pool.pool)), opts);
}

std::vector<SentenceMatch> sentence_attribution(const RowMatrix& images, const RowMatrix& sentences,
                                                const SimilarityConfig& cfg) {
  if (images.rows() == 0) throw Error(ErrorKind::EmptyInput, "no images to attribute");
  if (sentences.rows() == 0) throw Error(ErrorKind::EmptyInput, "article has no sentences");
  std::vector<SentenceMatch> out;
  out.reserve(static_cast<std::size_t>(images.rows()));
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    out.push_back(milsim_sentence_sim(images.row(i).transpose(), sentences, cfg));
  }
  return out;
}

}  // namespace storyalign
