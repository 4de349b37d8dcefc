#pragma once

#include <string>
#include <vector>

#include "storyalign/dataset.hpp"

namespace storyalign {

enum class IssueKind { BrokenReference, DuplicateId, EmptyArticle, EmptyImageSet, GroundTruthNotSubset };

std::string_view to_string(IssueKind kind) noexcept;

struct ValidationIssue {
  IssueKind kind;
  std::string story_id;  // empty for manifest-level issues
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
  std::size_t count(IssueKind kind) const;
};

/// Report-only consistency check of a manifest against its own id tables.
ValidationReport validate_dataset(const DatasetManifest& manifest);

}  // namespace storyalign
