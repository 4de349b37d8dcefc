#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "storyalign/dataset.hpp"

namespace storyalign {

namespace detail {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path + "'");
}

}  // namespace detail

using nlohmann::json;

namespace {

json synth_config_to_json(const SyntheticGenConfig& c) {
  return json{{"num_stories", c.num_stories},
              {"images_per_story", c.images_per_story},
              {"sentences_per_article", c.sentences_per_article},
              {"articles_per_story", c.articles_per_story},
              {"latent_dim", c.latent_dim},
              {"text_dim", c.text_dim},
              {"image_dim", c.image_dim},
              {"noise_scale", c.noise_scale},
              {"seed", c.seed},
              {"num_heldout", c.num_heldout},
              {"entities_per_story", c.entities_per_story}};
}

SyntheticGenConfig synth_config_from_json(const json& j) {
  SyntheticGenConfig c;
  c.num_stories = detail::get_or(j, "num_stories", c.num_stories);
  c.images_per_story = detail::get_or(j, "images_per_story", c.images_per_story);
  c.sentences_per_article = detail::get_or(j, "sentences_per_article", c.sentences_per_article);
  c.articles_per_story = detail::get_or(j, "articles_per_story", c.articles_per_story);
  c.latent_dim = detail::get_or(j, "latent_dim", c.latent_dim);
  c.text_dim = detail::get_or(j, "text_dim", c.text_dim);
  c.image_dim = detail::get_or(j, "image_dim", c.image_dim);
  c.noise_scale = detail::get_or(j, "noise_scale", c.noise_scale);
  c.seed = detail::get_or(j, "seed", c.seed);
  c.num_heldout = detail::get_or(j, "num_heldout", c.num_heldout);
  c.entities_per_story = detail::get_or(j, "entities_per_story", c.entities_per_story);
  return c;
}

json article_to_json(const Article& a) {
  return json{{"article_id", a.article_id},   {"channel", a.channel},
              {"title", a.title},             {"publication_time", a.publication_time},
              {"sentences", a.sentences},     {"image_ids", a.image_ids}};
}

Article article_from_json(const json& j) {
  Article a;
  a.article_id = j.at("article_id").get<std::string>();
  a.channel = detail::get_or<std::string>(j, "channel", "");
  a.title = detail::get_or<std::string>(j, "title", "");
  a.publication_time = detail::get_or<std::int64_t>(j, "publication_time", 0);
  a.sentences = detail::get_or(j, "sentences", std::vector<std::string>{});
  a.image_ids = detail::get_or(j, "image_ids", std::vector<std::string>{});
  return a;
}

json story_to_json(const Story& s) {
  json articles = json::array();
  for (const auto& a : s.articles) articles.push_back(article_to_json(a));
  json out{{"story_id", s.story_id}, {"articles", std::move(articles)},
           {"image_ids", s.image_ids}, {"split", s.split}};
  if (s.ground_truth_set) out["ground_truth_set"] = *s.ground_truth_set;
  return out;
}

Story story_from_json(const json& j) {
  Story s;
  s.story_id = j.at("story_id").get<std::string>();
  for (const auto& a : j.at("articles")) s.articles.push_back(article_from_json(a));
  s.image_ids = detail::get_or(j, "image_ids", std::vector<std::string>{});
  if (auto it = j.find("ground_truth_set"); it != j.end() && !it->is_null()) {
    s.ground_truth_set = it->get<std::vector<std::string>>();
  }
  s.split = detail::get_or<std::string>(j, "split", kTrainSplit);
  return s;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "manifest");
  try {
    DatasetManifest m;
    for (const auto& s : j.at("stories")) m.stories.push_back(story_from_json(s));
    m.text_embedding_file = j.at("text_embedding_file").get<std::string>();
    m.image_embedding_file = j.at("image_embedding_file").get<std::string>();
    m.text_dim = j.at("text_dim").get<std::size_t>();
    m.image_dim = j.at("image_dim").get<std::size_t>();
    m.dtype = parse_dtype(j.at("dtype").get<std::string>());
    m.text_ids = j.at("text_ids").get<std::vector<std::string>>();
    m.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    m.image_tags = detail::get_or(j, "image_tags", std::map<std::string, std::vector<std::string>>{});
    if (auto it = j.find("synthetic"); it != j.end() && !it->is_null()) {
      SyntheticMetadata meta;
      meta.config = synth_config_from_json(it->at("config"));
      meta.text_map = detail::matrix_from_json(it->at("text_map"));
      meta.image_map = detail::matrix_from_json(it->at("image_map"));
      m.synthetic = std::move(meta);
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
}

std::string serialize_manifest(const DatasetManifest& m) {
  json stories = json::array();
  for (const auto& s : m.stories) stories.push_back(story_to_json(s));
  json out{{"stories", std::move(stories)},
           {"text_embedding_file", m.text_embedding_file},
           {"image_embedding_file", m.image_embedding_file},
           {"text_dim", m.text_dim},
           {"image_dim", m.image_dim},
           {"dtype", std::string(to_string(m.dtype))},
           {"text_ids", m.text_ids},
           {"image_ids", m.image_ids},
           {"image_tags", m.image_tags}};
  if (m.synthetic) {
    out["synthetic"] = json{{"config", synth_config_to_json(m.synthetic->config)},
                            {"text_map", detail::matrix_to_json(m.synthetic->text_map)},
                            {"image_map", detail::matrix_to_json(m.synthetic->image_map)}};
  }
  return out.dump(1) + "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_text_file(path.string()));
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  detail::write_text_file(path.string(), serialize_manifest(manifest));
}

const Story* Dataset::find_story(const std::string& story_id) const {
  for (const auto& s : manifest.stories) {
    if (s.story_id == story_id) return &s;
  }
  return nullptr;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = read_manifest(dir / kManifestFileName);
  ds.text = load_embeddings({dir / ds.manifest.text_embedding_file, ds.manifest.text_ids,
                             ds.manifest.text_dim, ds.manifest.dtype});
  ds.images = load_embeddings({dir / ds.manifest.image_embedding_file, ds.manifest.image_ids,
                               ds.manifest.image_dim, ds.manifest.dtype});
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest = ds.manifest;
  manifest.text_ids = ds.text.ids();
  manifest.image_ids = ds.images.ids();
  manifest.text_dim = ds.text.dim();
  manifest.image_dim = ds.images.dim();
  write_manifest(dir / kManifestFileName, manifest);
  save_embeddings(dir / ds.manifest.text_embedding_file, ds.text, ds.manifest.dtype);
  save_embeddings(dir / ds.manifest.image_embedding_file, ds.images, ds.manifest.dtype);
}

}  // namespace storyalign
