#include "storyalign/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <unordered_set>

#include "storyalign/combinations.hpp"
#include "storyalign/error.hpp"
#include "storyalign/text.hpp"

namespace storyalign {

EntityTagSet EntityTagSet::make(std::string owner, std::span<const std::string> raw_tags) {
  EntityTagSet s{std::move(owner), {}};
  for (const auto& t : raw_tags) {
    if (!t.empty()) s.tags.insert(to_lower_ascii(t));
  }
  return s;
}

EntityTagSet ManifestTagger::tags_for(const std::string& image_id) const {
  auto it = tags_.find(image_id);
  if (it == tags_.end()) return EntityTagSet{image_id, {}};
  return EntityTagSet::make(image_id, it->second);
}

std::string_view to_string(Linkage l) noexcept { return l == Linkage::Average ? "average" : "complete"; }

Linkage parse_linkage(std::string_view name) {
  if (name == "avg" || name == "average") return Linkage::Average;
  if (name == "complete") return Linkage::Complete;
  throw Error(ErrorKind::InvalidArgument, "unknown linkage '" + std::string(name) + "' (avg|complete)");
}

namespace {

template <typename T>
std::vector<T> keep_channels(std::span<const T> items, const std::set<std::string>& allowlist) {
  if (allowlist.empty()) throw Error(ErrorKind::InvalidArgument, "channel allowlist is empty");
  std::vector<T> out;
  for (const auto& it : items)
    if (allowlist.count(it.channel) != 0) out.push_back(it);
  return out;
}

constexpr double kNoMerge = std::numeric_limits<double>::infinity();

double distance_or_no_merge(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return kNoMerge;
  return std::clamp(1.0 - a.dot(b) / (na * nb), 0.0, 2.0);
}

struct RowBest {
  double dist = kNoMerge;
  std::size_t col = std::numeric_limits<std::size_t>::max();
};

}  // namespace

std::vector<DocumentVector> filter_channels(std::span<const DocumentVector> docs,
                                            const std::set<std::string>& allowlist) {
  return keep_channels(docs, allowlist);
}

std::vector<Article> filter_channels(std::span<const Article> articles, const std::set<std::string>& allowlist) {
  return keep_channels(articles, allowlist);
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "cosine distance of vectors of unequal size");
  const double d = distance_or_no_merge(a, b);
  if (d == kNoMerge) throw Error(ErrorKind::DegenerateInput, "cosine distance of a zero vector");
  return d;
}

std::vector<std::vector<std::size_t>> cluster_vectors(std::span<const Eigen::VectorXd> vectors, double threshold,
                                                      Linkage linkage) {
  const std::size_t n = vectors.size();
  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[i] = {i};
  if (n < 2) return groups;

  Eigen::MatrixXd dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (vectors[i].size() != vectors[j].size()) {
        throw Error(ErrorKind::DimensionMismatch, "vectors to cluster have unequal sizes");
      }
      dist(i, j) = dist(j, i) = distance_or_no_merge(vectors[i], vectors[j]);
    }
  }

  std::vector<bool> active(n, true);
  std::vector<RowBest> best(n);
  // best[k] covers active columns > k; equal distances keep the lowest column.
  auto refresh = [&](std::size_t k) {
    best[k] = RowBest{};
    for (std::size_t j = k + 1; j < n; ++j)
      if (active[j] && (best[k].col == std::numeric_limits<std::size_t>::max() || dist(k, j) < best[k].dist)) {
        best[k] = RowBest{dist(k, j), j};
      }
  };
  for (std::size_t k = 0; k < n; ++k) refresh(k);

  while (true) {
    std::size_t pick = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || best[k].col == std::numeric_limits<std::size_t>::max()) continue;
      if (pick == n || best[k].dist < best[pick].dist) pick = k;
    }
    if (pick == n || !(best[pick].dist < threshold)) break;

    const std::size_t i = pick;
    const std::size_t j = best[pick].col;
    const double ni = static_cast<double>(groups[i].size());
    const double nj = static_cast<double>(groups[j].size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == i || k == j) continue;
      const double d = linkage == Linkage::Average ? (ni * dist(i, k) + nj * dist(j, k)) / (ni + nj)
                                                   : std::max(dist(i, k), dist(j, k));
      dist(i, k) = dist(k, i) = d;
    }
    active[j] = false;
    groups[i].insert(groups[i].end(), groups[j].begin(), groups[j].end());
    std::sort(groups[i].begin(), groups[i].end());
    groups[j].clear();

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k]) continue;
      if (k == i || best[k].col == i || best[k].col == j) {
        refresh(k);
      } else if (k < i && (dist(k, i) < best[k].dist || (dist(k, i) == best[k].dist && i < best[k].col))) {
        best[k] = RowBest{dist(k, i), i};
      }
    }
  }

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < n; ++k)
    if (active[k]) out.push_back(std::move(groups[k]));
  return out;
}

std::int64_t window_of(std::int64_t publication_time, std::size_t window_days) {
  if (window_days == 0) throw Error(ErrorKind::InvalidArgument, "window length must be at least one day");
  const auto span = static_cast<std::int64_t>(window_days) * 86400;
  std::int64_t w = publication_time / span;
  if (publication_time % span != 0 && publication_time < 0) --w;
  return w;
}

namespace {

std::string cluster_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%04zu", index);
  return buf;
}

}  // namespace

std::vector<ClusterNode> agglomerative_cluster(std::span<const DocumentVector> docs, const ClusterConfig& cfg) {
  if (docs.empty()) throw Error(ErrorKind::EmptyInput, "no documents to cluster");
  if (!(cfg.distance_threshold >= 0.0 && cfg.distance_threshold <= 2.0)) {
    throw Error(ErrorKind::InvalidArgument, "distance threshold must lie in [0, 2]");
  }
  const auto dim = docs.front().vector.size();
  std::unordered_set<std::string> ids;
  for (const auto& d : docs) {
    if (d.vector.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, "document " + d.article_id + " has dimension " +
                                                    std::to_string(d.vector.size()) + ", expected " +
                                                    std::to_string(dim));
    }
    if (!d.vector.allFinite()) throw Error(ErrorKind::NonFinite, "document " + d.article_id + " is not finite");
    if (d.vector.norm() == 0.0) throw Error(ErrorKind::DegenerateInput, "document " + d.article_id + " is zero");
    if (!ids.insert(d.article_id).second) throw Error(ErrorKind::DuplicateId, "duplicate article " + d.article_id);
  }

  std::map<std::int64_t, std::vector<std::size_t>> windows;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    windows[window_of(docs[i].publication_time, cfg.window_days)].push_back(i);
  }

  std::vector<ClusterNode> out;
  for (const auto& [w, members] : windows) {
    std::vector<Eigen::VectorXd> vecs;
    vecs.reserve(members.size());
    for (auto m : members) vecs.push_back(docs[m].vector);
    for (const auto& g : cluster_vectors(vecs, cfg.distance_threshold, cfg.linkage)) {
      ClusterNode node;
      node.cluster_id = cluster_name(out.size());
      node.centroid = Eigen::VectorXd::Zero(dim);
      for (auto local : g) {
        node.members.push_back(docs[members[local]].article_id);
        node.centroid += docs[members[local]].vector;
      }
      node.centroid /= static_cast<double>(g.size());
      out.push_back(std::move(node));
    }
  }
  return out;
}

Eigen::VectorXd entity_embedding(std::string_view entity, std::size_t dim) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : entity) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::mt19937_64 rng(h);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  const double norm = v.norm();
  return norm > 0.0 ? Eigen::VectorXd(v / norm) : v;
}

void assign_entity_pools(std::vector<ClusterNode>& clusters,
                         const std::map<std::string, std::vector<std::string>>& article_entities, std::size_t dim) {
  for (auto& c : clusters) {
    std::set<std::string> distinct;
    for (const auto& m : c.members) {
      auto it = article_entities.find(m);
      if (it == article_entities.end()) continue;
      for (const auto& e : it->second)
        if (!e.empty()) distinct.insert(to_lower_ascii(e));
    }
    Eigen::VectorXd pool = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& e : distinct) pool += entity_embedding(e, dim);
    if (!distinct.empty()) pool /= static_cast<double>(distinct.size());
    c.entity_pool = std::move(pool);
  }
}

std::vector<ClusterNode> entity_merge(std::span<const ClusterNode> clusters, double merge_threshold,
                                      Linkage linkage) {
  std::vector<Eigen::VectorXd> pools;
  pools.reserve(clusters.size());
  for (const auto& c : clusters) {
    if (c.entity_pool.size() == 0) {
      throw Error(ErrorKind::InvalidArgument, "cluster " + c.cluster_id + " has no entity pool");
    }
    pools.push_back(c.entity_pool);
  }

  std::vector<ClusterNode> out;
  for (const auto& g : cluster_vectors(pools, 1.0 - merge_threshold, linkage)) {
    ClusterNode merged = clusters[g.front()];
    if (g.size() > 1) {
      double total = 0.0;
      merged.centroid.setZero();
      merged.entity_pool.setZero();
      merged.members.clear();
      for (auto idx : g) {
        const auto& c = clusters[idx];
        const auto w = static_cast<double>(c.members.size());
        merged.members.insert(merged.members.end(), c.members.begin(), c.members.end());
        merged.centroid += w * c.centroid;
        merged.entity_pool += w * c.entity_pool;
        total += w;
      }
      merged.centroid /= total;
      merged.entity_pool /= total;
    }
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<std::string> select_diverse_set(std::span<const EntityTagSet> images, const DiverseSetOptions& opts) {
  std::vector<const EntityTagSet*> sorted;
  for (const auto& s : images) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->owner < b->owner; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->owner == sorted[i - 1]->owner) throw Error(ErrorKind::DuplicateId, "duplicate image " + sorted[i]->owner);
  }

  // Tags as sorted integer codes so intersections are cheap merges.
  std::map<std::string, int> code;
  std::vector<std::vector<int>> tags(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (const auto& t : sorted[i]->tags) tags[i].push_back(code.emplace(t, static_cast<int>(code.size())).first->second);
    std::sort(tags[i].begin(), tags[i].end());
  }

  auto neg_intersection = [&](std::span<const std::size_t> combo) {
    std::vector<int> acc = tags[combo[0]];
    std::vector<int> tmp;
    for (std::size_t c = 1; c < combo.size() && !acc.empty(); ++c) {
      tmp.clear();
      std::set_intersection(acc.begin(), acc.end(), tags[combo[c]].begin(), tags[combo[c]].end(),
                            std::back_inserter(tmp));
      acc.swap(tmp);
    }
    return -static_cast<double>(acc.size());
  };
  const auto best = best_combination(sorted.size(), opts.k, opts.budget, opts.seed, neg_intersection, opts.threads);

  std::vector<std::string> ids;
  for (auto i : best.indices) ids.push_back(sorted[i]->owner);
  return ids;
}

std::vector<Story> build_eval_set(std::span<const Story> stories, const EntityTagger& tagger,
                                  const EvalSetConfig& cfg) {
  if (cfg.min_images < cfg.k) {
    throw Error(ErrorKind::InvalidArgument, "min_images must be at least the set size k");
  }
  std::vector<std::size_t> qualifying;
  for (std::size_t i = 0; i < stories.size(); ++i)
    if (stories[i].image_ids.size() >= cfg.min_images) qualifying.push_back(i);
  if (qualifying.size() < cfg.count) {
    throw Error(ErrorKind::Insufficient, std::to_string(qualifying.size()) + " clusters have at least " +
                                             std::to_string(cfg.min_images) + " images, " +
                                             std::to_string(cfg.count) + " requested");
  }

  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, qualifying.size() - 1)(rng);
    std::swap(qualifying[i], qualifying[j]);
  }
  qualifying.resize(cfg.count);
  std::sort(qualifying.begin(), qualifying.end());

  std::vector<Story> out;
  for (std::size_t n = 0; n < qualifying.size(); ++n) {
    Story s = stories[qualifying[n]];
    std::vector<EntityTagSet> tagged;
    for (const auto& id : s.image_ids) {
      EntityTagSet t = tagger.tags_for(id);
      t.owner = id;
      tagged.push_back(std::move(t));
    }
    s.ground_truth_set = select_diverse_set(tagged, {cfg.k, cfg.budget, cfg.seed + n, cfg.threads});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace storyalign
