#include "storyalign/validate.hpp"

#include <algorithm>
#include <unordered_set>

namespace storyalign {

std::string_view to_string(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::BrokenReference: return "broken_reference";
    case IssueKind::DuplicateId: return "duplicate_id";
    case IssueKind::EmptyArticle: return "empty_article";
    case IssueKind::EmptyImageSet: return "empty_image_set";
    case IssueKind::GroundTruthNotSubset: return "ground_truth_not_subset";
  }
  return "unknown";
}

std::size_t ValidationReport::count(IssueKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [&](const auto& i) { return i.kind == kind; }));
}

ValidationReport validate_dataset(const DatasetManifest& m) {
  ValidationReport report;
  auto add = [&](IssueKind k, const std::string& story, std::string detail) {
    report.issues.push_back({k, story, std::move(detail)});
  };

  auto index_ids = [&](const std::vector<std::string>& ids, const char* table) {
    std::unordered_set<std::string> set;
    for (const auto& id : ids) {
      if (!set.insert(id).second) add(IssueKind::DuplicateId, "", std::string(table) + " id '" + id + "'");
    }
    return set;
  };
  const auto text_ids = index_ids(m.text_ids, "text");
  const auto image_ids = index_ids(m.image_ids, "image");

  std::unordered_set<std::string> story_ids, article_ids;
  for (const auto& story : m.stories) {
    if (!story_ids.insert(story.story_id).second) {
      add(IssueKind::DuplicateId, story.story_id, "story id '" + story.story_id + "'");
    }
    if (story.image_ids.empty()) add(IssueKind::EmptyImageSet, story.story_id, "story has no images");

    std::unordered_set<std::string> own_images;
    for (const auto& id : story.image_ids) {
      if (!own_images.insert(id).second) {
        add(IssueKind::DuplicateId, story.story_id, "image listed twice: '" + id + "'");
      }
      if (!image_ids.contains(id)) add(IssueKind::BrokenReference, story.story_id, "missing image '" + id + "'");
    }

    for (const auto& article : story.articles) {
      if (!article_ids.insert(article.article_id).second) {
        add(IssueKind::DuplicateId, story.story_id, "article id '" + article.article_id + "'");
      }
      if (article.sentences.empty()) {
        add(IssueKind::EmptyArticle, story.story_id, "article '" + article.article_id + "' has no sentences");
      }
      for (const auto& id : article.sentences) {
        if (!text_ids.contains(id)) {
          add(IssueKind::BrokenReference, story.story_id, "missing sentence '" + id + "'");
        }
      }
      for (const auto& id : article.image_ids) {
        if (!image_ids.contains(id)) {
          add(IssueKind::BrokenReference, story.story_id, "missing article image '" + id + "'");
        }
      }
    }

    if (story.ground_truth_set) {
      for (const auto& id : *story.ground_truth_set) {
        if (!own_images.contains(id)) {
          add(IssueKind::GroundTruthNotSubset, story.story_id, "ground-truth image '" + id + "' not in story");
        }
      }
    }
  }
  return report;
}

}  // namespace storyalign
