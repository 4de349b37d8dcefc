#include "storyalign/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "storyalign/error.hpp"
#include "storyalign/trainer.hpp"

namespace storyalign {

std::string_view to_string(SetScorer s) noexcept { return s == SetScorer::Single ? "single" : "mean"; }

SetScorer parse_scorer(std::string_view name) {
  if (name == "single") return SetScorer::Single;
  if (name == "mean") return SetScorer::Mean;
  throw Error(ErrorKind::InvalidArgument, "unknown scorer '" + std::string(name) + "' (single|mean)");
}

std::string EvalProtocol::tag() const {
  switch (kind) {
    case ProtocolKind::Fixed: return "fixed" + std::to_string(k);
    case ProtocolKind::Mixed: return "mixed";
    case ProtocolKind::Full: return "full";
  }
  return "unknown";
}

EvalProtocol parse_protocol(std::string_view name) {
  if (name == "fixed3") return EvalProtocol::fixed(3);
  if (name == "fixed4") return EvalProtocol::fixed(4);
  if (name == "fixed5") return EvalProtocol::fixed(5);
  if (name == "mixed") return EvalProtocol::mixed();
  throw Error(ErrorKind::InvalidArgument,
              "unknown protocol '" + std::string(name) + "' (fixed3|fixed4|fixed5|mixed)");
}

SetScoreFn make_set_scorer(SetScorer scorer, const SimilarityConfig& cfg) {
  if (scorer == SetScorer::Single) {
    return [cfg](const Eigen::VectorXd& t, const RowMatrix& im) { return set_score_single(t, im, cfg); };
  }
  return [cfg](const Eigen::VectorXd& t, const RowMatrix& im) { return set_score_mean_agg(t, im, cfg); };
}

Eigen::MatrixXd score_all(std::span<const Eigen::VectorXd> queries, std::span<const RowMatrix> candidates,
                          const SetScoreFn& scorer, std::size_t threads) {
  if (queries.empty()) throw Error(ErrorKind::EmptyInput, "no queries to score");
  if (candidates.empty()) throw Error(ErrorKind::EmptyInput, "no candidates to score");
  const auto Q = static_cast<Eigen::Index>(queries.size());
  const auto C = static_cast<Eigen::Index>(candidates.size());
  Eigen::MatrixXd scores(Q, C);

  auto rows = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q)
      for (Eigen::Index c = 0; c < C; ++c) {
        const double s = scorer(queries[q], candidates[static_cast<std::size_t>(c)]);
        if (!std::isfinite(s)) throw Error(ErrorKind::NonFinite, "non-finite score for query " + std::to_string(q));
        scores(static_cast<Eigen::Index>(q), c) = s;
      }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, queries.size());
  if (workers == 1) {
    rows(0, queries.size());
    return scores;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        rows(queries.size() * w / workers, queries.size() * (w + 1) / workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

std::size_t rank_of_gt(std::span<const double> scores, std::size_t gt) {
  if (gt >= scores.size()) throw Error(ErrorKind::InvalidArgument, "ground-truth index out of range");
  const double g = scores[gt];
  return 1 + static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [g](double s) { return s > g; }));
}

RetrievalMetrics aggregate(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw Error(ErrorKind::EmptyInput, "no ranks to aggregate");
  RetrievalMetrics m;
  m.count = ranks.size();
  const auto n = static_cast<double>(ranks.size());
  auto within = [&](std::size_t k) {
    return static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; })) / n;
  };
  m.r1 = within(1);
  m.r5 = within(5);
  m.r10 = within(10);
  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  m.median_rank = sorted[(sorted.size() - 1) / 2];
  return m;
}

SetScorer default_scorer(const TrainConfig& cfg) {
  if (cfg.objective == Objective::MilSim) return SetScorer::Mean;
  if (cfg.objective == Objective::InfoNCE && cfg.infonce_images == ImagePooling::Mean) return SetScorer::Mean;
  return SetScorer::Single;
}

SimilarityConfig scoring_similarity(const TrainConfig& cfg, SetScorer scorer) {
  if (scorer == SetScorer::Mean && cfg.objective == Objective::MilSim) return cfg.milsim_similarity().article;
  return cfg.contrastive_similarity();
}

RetrievalReport evaluate(const Dataset& data, const Model& model, const EvalOptions& opts) {
  auto stories = stories_in_split(data.manifest, opts.split);
  if (stories.empty()) {
    stories.resize(data.manifest.stories.size());
    for (std::size_t i = 0; i < stories.size(); ++i) stories[i] = i;
  }
  return evaluate_stories(data, stories, model, opts);
}

RetrievalReport evaluate_stories(const Dataset& data, std::span<const std::size_t> stories, const Model& model,
                                 const EvalOptions& opts) {
  if (stories.empty()) throw Error(ErrorKind::EmptyInput, "no stories to evaluate");
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> mixed_size(3, 5);

  std::vector<RowMatrix> candidates;
  std::vector<std::size_t> candidate_size;
  std::vector<Eigen::VectorXd> queries;
  std::vector<std::size_t> gt;
  RetrievalReport report;

  for (std::size_t c = 0; c < stories.size(); ++c) {
    const Story& story = data.manifest.stories.at(stories[c]);
    std::vector<std::string> ids;
    if (opts.protocol.kind == ProtocolKind::Full) {
      ids = story.ground_truth_set ? *story.ground_truth_set : story.image_ids;
    } else {
      if (!story.ground_truth_set) {
        throw Error(ErrorKind::NotFound, "story " + story.story_id + " has no ground_truth_set");
      }
      const std::size_t k = opts.protocol.kind == ProtocolKind::Mixed ? mixed_size(rng) : opts.protocol.k;
      if (story.ground_truth_set->size() < k) {
        throw Error(ErrorKind::Insufficient, "story " + story.story_id + " has " +
                                                 std::to_string(story.ground_truth_set->size()) +
                                                 " ground-truth images, protocol needs " + std::to_string(k));
      }
      ids.assign(story.ground_truth_set->begin(), story.ground_truth_set->begin() + static_cast<std::ptrdiff_t>(k));
    }
    if (ids.empty()) throw Error(ErrorKind::EmptyInput, "story " + story.story_id + " has no images");
    candidates.push_back(model.project_images(data.images.gather(ids)));
    candidate_size.push_back(ids.size());

    for (const auto& article : story.articles) {
      queries.push_back(model.article_vector(data.text.gather(article.sentences)));
      gt.push_back(c);
      report.query_ids.push_back(article.article_id);
    }
  }

  const Eigen::MatrixXd scores = score_all(queries, candidates, make_set_scorer(opts.scorer, opts.similarity), opts.threads);
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Eigen::RowVectorXd row = scores.row(static_cast<Eigen::Index>(q));
    const std::size_t r = rank_of_gt(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), gt[q]);
    report.ranks.push_back(r);
    by_size[candidate_size[gt[q]]].push_back(r);
  }

  report.protocol = opts.protocol.tag();
  report.scorer = std::string(to_string(opts.scorer));
  report.num_candidates = candidates.size();
  report.overall = aggregate(report.ranks);
  for (const auto& [size, ranks] : by_size) report.per_size[size] = aggregate(ranks);
  return report;
}

namespace {

nlohmann::ordered_json metrics_json(const RetrievalMetrics& m) {
  return {{"count", m.count}, {"r1", m.r1}, {"r5", m.r5}, {"r10", m.r10}, {"median_rank", m.median_rank}};
}

}  // namespace

std::string report_to_json(const RetrievalReport& report) {
  nlohmann::ordered_json j;
  j["protocol"] = report.protocol;
  j["scorer"] = report.scorer;
  j["num_candidates"] = report.num_candidates;
  j["overall"] = metrics_json(report.overall);
  nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
  for (const auto& [size, m] : report.per_size) sizes[std::to_string(size)] = metrics_json(m);
  j["per_size"] = sizes;
  nlohmann::ordered_json queries = nlohmann::ordered_json::array();
  for (std::size_t q = 0; q < report.ranks.size(); ++q) {
    queries.push_back({{"query", report.query_ids.at(q)}, {"rank", report.ranks[q]}});
  }
  j["queries"] = queries;
  return j.dump(2) + "\n";
}

std::string report_to_table(const RetrievalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "protocol %s, scorer %s, %zu candidates\n", report.protocol.c_str(),
                report.scorer.c_str(), report.num_candidates);
  out << line;
  std::snprintf(line, sizeof line, "%-10s %7s %8s %8s %8s %8s\n", "set size", "queries", "R@1", "R@5", "R@10",
                "MedR");
  out << line;
  auto row = [&](const std::string& label, const RetrievalMetrics& m) {
    std::snprintf(line, sizeof line, "%-10s %7zu %8.4f %8.4f %8.4f %8zu\n", label.c_str(), m.count, m.r1, m.r5,
                  m.r10, m.median_rank);
    out << line;
  };
  if (report.per_size.size() > 1) {
    for (const auto& [size, m] : report.per_size) row(std::to_string(size), m);
  }
  row("all", report.overall);
  return out.str();
}

}  // namespace storyalign
