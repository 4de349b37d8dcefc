#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "commands.hpp"
#include "storyalign/curation.hpp"
#include "storyalign/error.hpp"
#include "storyalign/synthetic.hpp"
#include "storyalign/text.hpp"
#include "storyalign/validate.hpp"

namespace storyalign::cli {

namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace

int run_synth(const Context& ctx, const SynthOptions& o) {
  const fs::path out = require_out(ctx);
  SyntheticGenConfig cfg = o.gen;
  cfg.seed = ctx.common.seed;
  const Dataset ds = generate_synthetic_corpus(cfg);
  save_dataset(out, ds);
  write_run_manifest(ctx, out, {});
  ctx.out << "wrote " << ds.manifest.stories.size() << " stories, " << ds.text.rows() << " sentences and "
          << ds.images.rows() << " images to " << out.string() << "\n";
  return 0;
}

int run_ingest(const Context& ctx, const IngestOptions& o) {
  const fs::path dir = o.data;
  const DatasetManifest manifest = read_manifest(dir / kManifestFileName);
  const ValidationReport report = validate_dataset(manifest);

  nlohmann::ordered_json j;
  j["stories"] = manifest.stories.size();
  j["issues"] = nlohmann::ordered_json::array();
  for (const auto& issue : report.issues) {
    j["issues"].push_back({{"kind", to_string(issue.kind)}, {"story", issue.story_id}, {"detail", issue.detail}});
  }
  if (report.ok()) {
    // Reading the embedding files validates their headers and values.
    const Dataset ds = load_dataset(dir);
    j["sentences"] = ds.text.rows();
    j["images"] = ds.images.rows();
  }
  if (!ctx.common.out.empty()) {
    const fs::path out = ctx.common.out;
    fs::create_directories(out);
    write_json(out / "validation_report.json", j);
    write_run_manifest(ctx, out,
                       checksum_inputs(report.ok() ? dataset_files(dir) : std::vector<fs::path>{dir / kManifestFileName}));
  }
  if (!report.ok()) {
    nlohmann::ordered_json e{{"error", "Validation"},
                             {"message", std::to_string(report.issues.size()) + " issue(s) in " + dir.string()},
                             {"issues", j["issues"]}};
    ctx.err << e.dump() << "\n";
    return 2;
  }
  ctx.out << "ok: " << manifest.stories.size() << " stories, " << j["sentences"].get<std::size_t>()
          << " sentences, " << j["images"].get<std::size_t>() << " images\n";
  return 0;
}

int run_cluster(const Context& ctx, const ClusterOptions& o) {
  const fs::path out = require_out(ctx);
  const InputChecksums inputs = checksum_inputs(dataset_files(o.data));
  Dataset ds = load_dataset(o.data);

  std::unordered_map<std::string, const Article*> article_by_id;
  std::unordered_map<std::string, std::string> split_of;
  std::vector<DocumentVector> docs;
  std::map<std::string, std::vector<std::string>> entities;
  for (const auto& story : ds.manifest.stories) {
    for (const auto& a : story.articles) {
      article_by_id[a.article_id] = &a;
      split_of[a.article_id] = story.split;
      const RowMatrix rows = ds.text.gather(a.sentences);
      docs.push_back({a.article_id, a.publication_time, rows.colwise().mean().transpose(), a.channel});
      auto& ents = entities[a.article_id];
      ents = extract_entities(a.title);
      for (const auto& img : a.image_ids) {
        auto it = ds.manifest.image_tags.find(img);
        if (it != ds.manifest.image_tags.end()) ents.insert(ents.end(), it->second.begin(), it->second.end());
      }
    }
  }
  if (!o.channels.empty()) {
    docs = filter_channels(docs, std::set<std::string>(o.channels.begin(), o.channels.end()));
  }

  ClusterConfig cfg{o.window_days, o.threshold, parse_linkage(o.linkage)};
  std::vector<ClusterNode> clusters = agglomerative_cluster(docs, cfg);
  const std::size_t before_merge = clusters.size();
  if (!o.no_entity_merge) {
    assign_entity_pools(clusters, entities, ds.text.dim());
    clusters = entity_merge(clusters, o.entity_threshold, cfg.linkage);
  }

  std::vector<Story> stories;
  nlohmann::ordered_json listing = nlohmann::ordered_json::array();
  std::size_t without_images = 0;
  for (const auto& c : clusters) {
    Story s;
    s.story_id = c.cluster_id;
    s.split = split_of.at(c.members.front());
    std::set<std::string> seen;
    for (const auto& m : c.members) {
      const Article& a = *article_by_id.at(m);
      s.articles.push_back(a);
      for (const auto& img : a.image_ids)
        if (seen.insert(img).second) s.image_ids.push_back(img);
    }
    listing.push_back({{"cluster_id", c.cluster_id}, {"members", c.members}, {"images", s.image_ids.size()}});
    if (s.image_ids.empty()) {
      ++without_images;
      continue;
    }
    stories.push_back(std::move(s));
  }
  ds.manifest.stories = std::move(stories);
  save_dataset(out, ds);

  nlohmann::ordered_json summary;
  summary["documents"] = docs.size();
  summary["clusters_before_entity_merge"] = before_merge;
  summary["clusters"] = clusters.size();
  summary["clusters_without_images"] = without_images;
  summary["listing"] = listing;
  write_json(out / "clusters.json", summary);
  write_run_manifest(ctx, out, inputs);
  ctx.out << docs.size() << " articles -> " << before_merge << " clusters -> " << clusters.size()
          << " after entity merge; " << ds.manifest.stories.size() << " stories with images\n";
  return 0;
}

int run_select_sets(const Context& ctx, const SelectSetsOptions& o) {
  const fs::path out = require_out(ctx);
  const InputChecksums inputs = checksum_inputs(dataset_files(o.data));
  Dataset ds = load_dataset(o.data);

  std::vector<Story> target;
  std::vector<Story> kept;
  for (auto& s : ds.manifest.stories) (s.split == o.split ? target : kept).push_back(std::move(s));
  std::size_t qualifying = 0;
  for (const auto& s : target) qualifying += s.image_ids.size() >= o.min_images ? 1 : 0;

  EvalSetConfig cfg;
  cfg.k = o.k;
  cfg.min_images = o.min_images;
  cfg.count = o.count == 0 ? qualifying : o.count;
  cfg.budget = o.budget;
  cfg.seed = ctx.common.seed;
  cfg.threads = ctx.common.threads;
  const ManifestTagger tagger(ds.manifest);
  std::vector<Story> curated = build_eval_set(target, tagger, cfg);
  if (curated.empty()) throw Error(ErrorKind::Insufficient, "no story in split '" + o.split + "' qualifies");

  const std::size_t dropped = target.size() - curated.size();
  kept.insert(kept.end(), std::make_move_iterator(curated.begin()), std::make_move_iterator(curated.end()));
  ds.manifest.stories = std::move(kept);
  save_dataset(out, ds);
  write_run_manifest(ctx, out, inputs);
  ctx.out << "curated " << curated.size() << " '" << o.split << "' stories with " << o.k << "-image sets ("
          << dropped << " dropped)\n";
  return 0;
}

}  // namespace storyalign::cli
