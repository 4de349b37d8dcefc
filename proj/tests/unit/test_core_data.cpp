#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "storyalign/dataset.hpp"
#include "storyalign/error.hpp"
#include "storyalign/synthetic.hpp"
#include "storyalign/text.hpp"
#include "storyalign/validate.hpp"

namespace fs = std::filesystem;
using namespace storyalign;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("storyalign_core_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::InvalidArgument;
}

RowMatrix two_by_three() {
  RowMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  return m;
}

}  // namespace

TEST(EmbeddingFile, RoundTripPreservesValuesAndIds) {
  const auto dir = scratch("roundtrip");
  const EmbeddingMatrix original(two_by_three(), {"a", "b"});
  for (DType dt : {DType::F32, DType::F64}) {
    save_embeddings(dir / "m.emb", original, dt);
    const auto loaded = load_embeddings({dir / "m.emb", {"a", "b"}, 3, dt});
    EXPECT_EQ(loaded.ids(), original.ids());
    EXPECT_EQ(loaded.data(), original.data());
  }
}

TEST(EmbeddingFile, SaveIsByteStable) {
  const auto dir = scratch("bytes");
  save_embedding_file(dir / "a.emb", two_by_three(), DType::F64);
  const auto reloaded = read_embedding_file(dir / "a.emb", 2, 3, DType::F64);
  save_embedding_file(dir / "b.emb", reloaded, DType::F64);
  EXPECT_EQ(file_checksum(dir / "a.emb"), file_checksum(dir / "b.emb"));
}

TEST(EmbeddingFile, DeclaredRowsBeyondFileIsRowCountError) {
  const auto dir = scratch("rows");
  save_embedding_file(dir / "m.emb", two_by_three(), DType::F64);
  EXPECT_EQ(kind_of([&] { read_embedding_file(dir / "m.emb", 3, 3, DType::F64); }), ErrorKind::RowCountMismatch);
  EXPECT_EQ(kind_of([&] { read_embedding_file(dir / "m.emb", 2, 4, DType::F64); }), ErrorKind::DimensionMismatch);
}

TEST(EmbeddingFile, TruncatedPayloadIsRejected) {
  const auto dir = scratch("truncated");
  {
    std::ofstream f(dir / "m.emb", std::ios::binary);
    f << "STORYEMB1 f64 2 3\n";
    const double v[4] = {1, 2, 3, 4};
    f.write(reinterpret_cast<const char*>(v), sizeof v);
  }
  EXPECT_EQ(kind_of([&] { read_embedding_file(dir / "m.emb", 2, 3, DType::F64); }), ErrorKind::RowCountMismatch);
}

TEST(EmbeddingFile, NonFiniteValueIsRejected) {
  const auto dir = scratch("nonfinite");
  {
    std::ofstream f(dir / "m.emb", std::ios::binary);
    f << "STORYEMB1 f64 1 2\n";
    const double v[2] = {1.0, std::numeric_limits<double>::quiet_NaN()};
    f.write(reinterpret_cast<const char*>(v), sizeof v);
  }
  EXPECT_EQ(kind_of([&] { read_embedding_file(dir / "m.emb", 1, 2, DType::F64); }), ErrorKind::NonFinite);
}

TEST(EmbeddingMatrix, RejectsDuplicateIdsAndCountMismatch) {
  EXPECT_EQ(kind_of([] { EmbeddingMatrix(two_by_three(), {"a", "a"}); }), ErrorKind::DuplicateId);
  EXPECT_EQ(kind_of([] { EmbeddingMatrix(two_by_three(), {"a"}); }), ErrorKind::RowCountMismatch);
}

TEST(EmbeddingMatrix, GatherFollowsRequestedOrder) {
  const EmbeddingMatrix m(two_by_three(), {"a", "b"});
  const RowMatrix g = m.gather({"b", "a", "b"});
  EXPECT_EQ(g.row(0), two_by_three().row(1));
  EXPECT_EQ(g.row(1), two_by_three().row(0));
  EXPECT_EQ(kind_of([&] { m.gather({"zzz"}); }), ErrorKind::NotFound);
}

TEST(SplitSentences, TwoTerminalPeriods) {
  EXPECT_EQ(split_sentences("Hello world. Bye."), (std::vector<std::string>{"Hello world.", "Bye."}));
}

TEST(SplitSentences, AbbreviationSuppressesSplit) {
  EXPECT_EQ(split_sentences("Dr. Smith arrived."), (std::vector<std::string>{"Dr. Smith arrived."}));
  EXPECT_EQ(split_sentences("The U.S. Senate voted. Then it rested!"),
            (std::vector<std::string>{"The U.S. Senate voted.", "Then it rested!"}));
}

TEST(SplitSentences, LowercaseContinuationDoesNotSplit) {
  EXPECT_EQ(split_sentences("It cost 3.5 million. so what? Fine."),
            (std::vector<std::string>{"It cost 3.5 million. so what?", "Fine."}));
}

TEST(SplitSentences, EmptyInputIsAnError) {
  EXPECT_EQ(kind_of([] { split_sentences(""); }), ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([] { split_sentences("   \n\t"); }), ErrorKind::EmptyInput);
}

TEST(SplitSentences, IdempotentAndCovering) {
  const std::string text =
      "Mr. Jones met Ms. Lee in Paris. They spoke for hours! Was it useful? Reports, e.g. from AP, say yes.";
  const auto parts = split_sentences(text);
  std::string joined, stripped;
  for (const auto& p : parts) {
    EXPECT_EQ(split_sentences(p), std::vector<std::string>{p});
    for (char c : p)
      if (!std::isspace(static_cast<unsigned char>(c))) joined += c;
  }
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) stripped += c;
  EXPECT_EQ(joined, stripped);
}

TEST(ExtractEntities, CapitalizedRunsLowercasedAndDeduplicated) {
  const auto e = extract_entities("The White House said Joe Biden met Angela Merkel. The White House agreed.");
  EXPECT_EQ(e, (std::vector<std::string>{"white house", "joe biden", "angela merkel"}));
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 12;
  cfg.num_heldout = 4;
  cfg.seed = 42;
  const auto a = generate_synthetic_corpus(cfg);
  const auto b = generate_synthetic_corpus(cfg);
  EXPECT_EQ(serialize_manifest(a.manifest), serialize_manifest(b.manifest));
  EXPECT_EQ(a.text.data(), b.text.data());
  EXPECT_EQ(a.images.data(), b.images.data());
  cfg.seed = 43;
  EXPECT_NE(generate_synthetic_corpus(cfg).text.data(), a.text.data());
}

TEST(Synthetic, CountsMatchConfig) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 10;
  cfg.num_heldout = 3;
  cfg.images_per_story = 5;
  const auto ds = generate_synthetic_corpus(cfg);
  EXPECT_EQ(ds.manifest.stories.size(), 10u);
  EXPECT_EQ(ds.images.rows(), 50u);
  EXPECT_EQ(ds.text.rows(), 10u * cfg.articles_per_story * cfg.sentences_per_article);
  std::size_t test = 0;
  for (const auto& s : ds.manifest.stories) test += s.split == kTestSplit;
  EXPECT_EQ(test, 3u);
  EXPECT_TRUE(validate_dataset(ds.manifest).ok());
}

TEST(Synthetic, InvalidConfigIsRejected) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 0;
  EXPECT_EQ(kind_of([&] { generate_synthetic_corpus(cfg); }), ErrorKind::InvalidArgument);
  cfg = {};
  cfg.noise_scale = -1.0;
  EXPECT_EQ(kind_of([&] { generate_synthetic_corpus(cfg); }), ErrorKind::InvalidArgument);
}

TEST(Synthetic, WithinStoryPairsAreCloserThanCrossStoryPairs) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 100;
  cfg.num_heldout = 0;
  cfg.noise_scale = 0.1;
  cfg.seed = 7;
  const auto ds = generate_synthetic_corpus(cfg);

  // Cosine between a story's latents as seen through each modality: compare
  // the first sentence and first image of the same story vs. of the next story.
  // Both modalities use different maps, so we compare latents recovered by least squares.
  const auto& meta = *ds.manifest.synthetic;
  const Eigen::MatrixXd pinv_t = Eigen::MatrixXd(meta.text_map).completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd pinv_i = Eigen::MatrixXd(meta.image_map).completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> within, cross;
  const auto& stories = ds.manifest.stories;
  for (std::size_t s = 0; s < stories.size(); ++s) {
    const Eigen::RowVectorXd t = ds.text.row(stories[s].articles[0].sentences[0]) * pinv_t;
    const Eigen::RowVectorXd i_same = ds.images.row(stories[s].image_ids[0]) * pinv_i;
    const Eigen::RowVectorXd i_other = ds.images.row(stories[(s + 1) % stories.size()].image_ids[0]) * pinv_i;
    within.push_back(t.dot(i_same) / (t.norm() * i_same.norm()));
    cross.push_back(t.dot(i_other) / (t.norm() * i_other.norm()));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto se = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  const double gap = mean(within) - mean(cross);
  EXPECT_GT(gap, 3.0 * std::sqrt(se(within) * se(within) + se(cross) * se(cross)));
}

TEST(Manifest, SaveLoadRoundTrip) {
  const auto dir = scratch("manifest");
  SyntheticGenConfig cfg;
  cfg.num_stories = 6;
  cfg.num_heldout = 2;
  const auto ds = generate_synthetic_corpus(cfg);
  save_dataset(dir, ds);
  const auto loaded = load_dataset(dir);
  EXPECT_EQ(serialize_manifest(loaded.manifest), serialize_manifest(ds.manifest));
  EXPECT_EQ(loaded.text.data(), ds.text.data());
  EXPECT_EQ(loaded.images.data(), ds.images.data());
}

TEST(Manifest, MalformedJsonIsFormatError) {
  EXPECT_EQ(kind_of([] { parse_manifest("{not json"); }), ErrorKind::Format);
}

TEST(Validate, ConsistentManifestHasNoIssues) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 4;
  cfg.num_heldout = 1;
  EXPECT_TRUE(validate_dataset(generate_synthetic_corpus(cfg).manifest).ok());
}

TEST(Validate, MissingImageIsOneBrokenReference) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 4;
  cfg.num_heldout = 1;
  auto m = generate_synthetic_corpus(cfg).manifest;
  m.stories[1].image_ids.push_back("no-such-image");
  const auto r = validate_dataset(m);
  EXPECT_EQ(r.count(IssueKind::BrokenReference), 1u);
}

TEST(Validate, ArticleWithoutSentencesIsOneEmptyArticle) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 4;
  cfg.num_heldout = 1;
  auto m = generate_synthetic_corpus(cfg).manifest;
  m.stories[2].articles[0].sentences.clear();
  const auto r = validate_dataset(m);
  EXPECT_EQ(r.count(IssueKind::EmptyArticle), 1u);
  EXPECT_EQ(r.issues.size(), 1u);
}

TEST(Validate, EmptyImageSetAndGroundTruthOutsideStory) {
  SyntheticGenConfig cfg;
  cfg.num_stories = 4;
  cfg.num_heldout = 1;
  auto m = generate_synthetic_corpus(cfg).manifest;
  m.stories[0].ground_truth_set = std::vector<std::string>{m.stories[1].image_ids[0]};
  m.stories[3].image_ids.clear();
  m.stories[3].ground_truth_set.reset();
  const auto r = validate_dataset(m);
  EXPECT_EQ(r.count(IssueKind::GroundTruthNotSubset), 1u);
  EXPECT_EQ(r.count(IssueKind::EmptyImageSet), 1u);
}
