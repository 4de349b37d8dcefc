#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "storyalign/embedding.hpp"
#include "storyalign/model.hpp"
#include "storyalign/objectives.hpp"
#include "storyalign/retrieval_eval.hpp"

namespace storyalign {

/// Entity -> image ids provider. Failures should be reported by throwing.
class ImageLookup {
 public:
  virtual ~ImageLookup() = default;
  virtual std::vector<std::string> lookup(const std::string& entity, std::size_t m) const = 0;
};

/// Looks entities up in an image -> tags table; returns the first m matching ids in id order.
class TagIndexLookup final : public ImageLookup {
 public:
  explicit TagIndexLookup(const std::map<std::string, std::vector<std::string>>& image_tags);
  std::vector<std::string> lookup(const std::string& entity, std::size_t m) const override;

 private:
  std::map<std::string, std::vector<std::string>> by_tag_;
};

struct CandidatePool {
  std::map<std::string, std::vector<std::string>> per_entity;
  std::vector<std::string> pool;  // unique ids, first-seen order
};

/// Up to m images per entity, merged without duplicates.
/// Throws InvalidArgument for no entities, Provider when the lookup fails and
/// EmptyInput when nothing was found.
CandidatePool candidate_pool_from_entities(std::span<const std::string> entities, const ImageLookup& lookup,
                                           std::size_t m);

struct BestSetOptions {
  std::size_t set_size = 5;
  SetScorer scorer = SetScorer::Mean;
  SimilarityConfig similarity{0.07, false};
  std::uint64_t budget = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct ImageSetChoice {
  std::vector<std::string> ids;  // ascending
  double score = 0.0;
  std::size_t evaluated = 0;
  bool exhaustive = false;
};

/// Highest-scoring set of `set_size` images for an article vector. `projected`
/// holds the joint-space row of pool_ids[i] at row i. The pool is put in id
/// order first, so the answer does not depend on the input order; ties go to
/// the lexicographically smallest id tuple.
ImageSetChoice best_image_set(const Eigen::VectorXd& article, std::span<const std::string> pool_ids,
                              const RowMatrix& projected, const BestSetOptions& opts);

/// Convenience form that gathers and projects the pool through `model`.
ImageSetChoice best_image_set(const Eigen::VectorXd& article, const CandidatePool& pool, const EmbeddingMatrix& images,
                              const Model& model, const BestSetOptions& opts);

/// Best sentence for every image row (both already in the joint space).
std::vector<SentenceMatch> sentence_attribution(const RowMatrix& images, const RowMatrix& sentences,
                                                const SimilarityConfig& cfg);

}  // namespace storyalign
