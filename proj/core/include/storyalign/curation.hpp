#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "storyalign/dataset.hpp"

namespace storyalign {

struct DocumentVector {
  std::string article_id;
  std::int64_t publication_time = 0;
  Eigen::VectorXd vector;
  std::string channel;
};

/// Entities detected for an image or a cluster. Tags are lowercase and unique.
struct EntityTagSet {
  std::string owner;
  std::set<std::string> tags;

  static EntityTagSet make(std::string owner, std::span<const std::string> raw_tags);
};

/// Source of entity tags for images. Implementations may call out to a
/// detection service; the manifest-backed one reads `image_tags`.
class EntityTagger {
 public:
  virtual ~EntityTagger() = default;
  virtual EntityTagSet tags_for(const std::string& image_id) const = 0;
};

class ManifestTagger final : public EntityTagger {
 public:
  explicit ManifestTagger(const DatasetManifest& manifest) : tags_(manifest.image_tags) {}
  EntityTagSet tags_for(const std::string& image_id) const override;

 private:
  std::map<std::string, std::vector<std::string>> tags_;
};

struct ClusterNode {
  std::string cluster_id;
  std::vector<std::string> members;  // article ids
  Eigen::VectorXd centroid;          // mean of member vectors
  Eigen::VectorXd entity_pool;       // mean of member entity representations; empty if unset
};

enum class Linkage { Average, Complete };
std::string_view to_string(Linkage l) noexcept;
/// "avg", "average" or "complete".
Linkage parse_linkage(std::string_view name);

std::vector<DocumentVector> filter_channels(std::span<const DocumentVector> docs,
                                            const std::set<std::string>& allowlist);
std::vector<Article> filter_channels(std::span<const Article> articles, const std::set<std::string>& allowlist);

/// 1 - cosine similarity. Throws DegenerateInput for a zero vector.
double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Agglomerative clustering of `vectors` under cosine distance. Repeatedly
/// merges the closest pair while its linkage distance is below `threshold`;
/// equal distances go to the pair with the smallest (first, second) member
/// index. Zero vectors never merge. Groups are ascending and ordered by their
/// first member.
std::vector<std::vector<std::size_t>> cluster_vectors(std::span<const Eigen::VectorXd> vectors, double threshold,
                                                      Linkage linkage);

struct ClusterConfig {
  std::size_t window_days = 7;
  double distance_threshold = 0.15;
  Linkage linkage = Linkage::Average;
};

/// Window index of a publication time: floor(t / (window_days * 86400)).
std::int64_t window_of(std::int64_t publication_time, std::size_t window_days);

/// Clusters documents separately inside each non-overlapping time window.
/// Output is ordered by window, then by first member in input order.
std::vector<ClusterNode> agglomerative_cluster(std::span<const DocumentVector> docs, const ClusterConfig& cfg);

/// Deterministic unit vector for an entity name (seeded Gaussian, hashed name).
Eigen::VectorXd entity_embedding(std::string_view entity, std::size_t dim);

/// Sets each cluster's entity_pool to the mean embedding of the distinct
/// (lowercased) entities mentioned by its members.
/// Clusters whose members have no entities get a zero vector.
void assign_entity_pools(std::vector<ClusterNode>& clusters,
                         const std::map<std::string, std::vector<std::string>>& article_entities, std::size_t dim);

/// Second agglomerative pass over entity-pool vectors: clusters merge while the
/// cosine similarity of their pools exceeds `merge_threshold`.
std::vector<ClusterNode> entity_merge(std::span<const ClusterNode> clusters, double merge_threshold,
                                      Linkage linkage = Linkage::Average);

struct DiverseSetOptions {
  std::size_t k = 5;
  std::uint64_t budget = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// k images whose tag sets have the smallest common intersection; equal sizes
/// go to the lexicographically smallest id tuple. Returns ids in ascending order.
std::vector<std::string> select_diverse_set(std::span<const EntityTagSet> images, const DiverseSetOptions& opts);

struct EvalSetConfig {
  std::size_t k = 5;
  std::size_t min_images = 5;
  std::size_t count = 50;
  std::uint64_t budget = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Seeded choice of `count` stories with at least min_images images, each given
/// a ground_truth_set from select_diverse_set. Chosen stories keep their input order.
std::vector<Story> build_eval_set(std::span<const Story> stories, const EntityTagger& tagger,
                                  const EvalSetConfig& cfg);

}  // namespace storyalign
