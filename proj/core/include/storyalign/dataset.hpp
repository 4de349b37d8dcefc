#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "storyalign/embedding.hpp"

namespace storyalign {

struct Article {
  std::string article_id;
  std::string channel;
  std::string title;
  std::int64_t publication_time = 0;   // epoch seconds
  std::vector<std::string> sentences;  // text embedding ids, in reading order
  std::vector<std::string> image_ids;  // images published alongside this article
};

inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kTestSplit = "test";

struct Story {
  std::string story_id;
  std::vector<Article> articles;
  std::vector<std::string> image_ids;
  std::optional<std::vector<std::string>> ground_truth_set;
  std::string split = kTrainSplit;
};

struct SyntheticGenConfig {
  std::size_t num_stories = 150;
  std::size_t images_per_story = 5;
  std::size_t sentences_per_article = 8;
  std::size_t articles_per_story = 2;
  std::size_t latent_dim = 16;
  std::size_t text_dim = 32;
  std::size_t image_dim = 32;
  double noise_scale = 0.1;
  std::uint64_t seed = 0;
  std::size_t num_heldout = 50;        // trailing stories tagged as the test split
  std::size_t entities_per_story = 6;  // size of each story's entity vocabulary

  void validate() const;
};

/// Generator provenance kept in the manifest so a corpus can be regenerated.
struct SyntheticMetadata {
  SyntheticGenConfig config;
  RowMatrix text_map;   // latent_dim x text_dim
  RowMatrix image_map;  // latent_dim x image_dim
};

struct DatasetManifest {
  std::vector<Story> stories;
  std::string text_embedding_file = "text.emb";
  std::string image_embedding_file = "image.emb";
  std::size_t text_dim = 0;
  std::size_t image_dim = 0;
  DType dtype = DType::F64;
  std::vector<std::string> text_ids;   // row order of the text embedding file
  std::vector<std::string> image_ids;  // row order of the image embedding file
  std::map<std::string, std::vector<std::string>> image_tags;  // image id -> entity tags
  std::optional<SyntheticMetadata> synthetic;
};

/// A manifest together with its loaded embedding matrices.
struct Dataset {
  DatasetManifest manifest;
  EmbeddingMatrix text;
  EmbeddingMatrix images;

  const Story* find_story(const std::string& story_id) const;
};

inline constexpr const char* kManifestFileName = "manifest.json";

DatasetManifest parse_manifest(const std::string& json_text);
std::string serialize_manifest(const DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads `<dir>/manifest.json` and both embedding files it names.
Dataset load_dataset(const std::filesystem::path& dir);
/// Writes manifest.json plus the two embedding files into `dir` (created if needed).
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace storyalign
