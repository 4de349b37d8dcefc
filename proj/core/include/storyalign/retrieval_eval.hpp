#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "storyalign/dataset.hpp"
#include "storyalign/model.hpp"
#include "storyalign/objectives.hpp"

namespace storyalign {

struct TrainConfig;

/// How an article is scored against an image set.
enum class SetScorer {
  Single,  // mean of per-image similarities
  Mean,    // similarity to the mean-pooled image set
};

std::string_view to_string(SetScorer s) noexcept;
SetScorer parse_scorer(std::string_view name);

enum class ProtocolKind { Fixed, Mixed, Full };

/// fixed-k: every candidate is the first k ids of a story's ground-truth set.
/// mixed: each story is assigned k in {3,4,5} by a seeded uniform draw.
/// full: the whole ground-truth set (or every image when absent); used for validation.
struct EvalProtocol {
  ProtocolKind kind = ProtocolKind::Fixed;
  std::size_t k = 5;

  static EvalProtocol fixed(std::size_t k) { return {ProtocolKind::Fixed, k}; }
  static EvalProtocol mixed() { return {ProtocolKind::Mixed, 0}; }
  static EvalProtocol full() { return {ProtocolKind::Full, 0}; }
  std::string tag() const;
};

/// Accepts "fixed3", "fixed4", "fixed5", "mixed".
EvalProtocol parse_protocol(std::string_view name);

struct ScoreMatrix {
  Eigen::MatrixXd scores;  // queries x candidates
  std::vector<std::string> query_ids;
  std::vector<std::string> candidate_ids;
  std::vector<std::size_t> gt;  // candidate index per query
};

using SetScoreFn = std::function<double(const Eigen::VectorXd& text, const RowMatrix& images)>;

SetScoreFn make_set_scorer(SetScorer scorer, const SimilarityConfig& cfg);

/// Full query x candidate score matrix. Rows are independent and may be
/// computed on up to `threads` threads; the result does not depend on it.
Eigen::MatrixXd score_all(std::span<const Eigen::VectorXd> queries, std::span<const RowMatrix> candidates,
                          const SetScoreFn& scorer, std::size_t threads = 1);

/// 1 + number of candidates scoring strictly above the ground truth.
std::size_t rank_of_gt(std::span<const double> scores, std::size_t gt);

struct RetrievalMetrics {
  std::size_t count = 0;
  double r1 = 0.0, r5 = 0.0, r10 = 0.0;
  std::size_t median_rank = 0;  // lower median
};

struct RetrievalReport {
  std::string protocol;
  std::string scorer;
  std::size_t num_candidates = 0;
  std::vector<std::string> query_ids;
  std::vector<std::size_t> ranks;
  RetrievalMetrics overall;
  std::map<std::size_t, RetrievalMetrics> per_size;  // keyed by ground-truth set size

  double r1() const noexcept { return overall.r1; }
  double r5() const noexcept { return overall.r5; }
  double r10() const noexcept { return overall.r10; }
  std::size_t median_rank() const noexcept { return overall.median_rank; }
};

/// R@K = fraction of ranks <= K; median = lower median. Throws EmptyInput.
RetrievalMetrics aggregate(std::span<const std::size_t> ranks);

struct EvalOptions {
  EvalProtocol protocol = EvalProtocol::fixed(5);
  SetScorer scorer = SetScorer::Mean;
  SimilarityConfig similarity{0.07, false};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string split = kTestSplit;  // falls back to every story when no story carries this split
};

/// Scorer matching how a model was trained: per-image averaging for the
/// single-image and MIL-NCE objectives, pooled sets otherwise.
SetScorer default_scorer(const TrainConfig& cfg);

/// Similarity used to score sets with a model trained under `cfg`.
SimilarityConfig scoring_similarity(const TrainConfig& cfg, SetScorer scorer);

/// Article-to-image-set retrieval over the stories of `opts.split`: every
/// article is a query and every story contributes one candidate set.
RetrievalReport evaluate(const Dataset& data, const Model& model, const EvalOptions& opts);
RetrievalReport evaluate_stories(const Dataset& data, std::span<const std::size_t> stories, const Model& model,
                                 const EvalOptions& opts);

std::string report_to_json(const RetrievalReport& report);
std::string report_to_table(const RetrievalReport& report);

}  // namespace storyalign
