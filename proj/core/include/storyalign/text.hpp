#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace storyalign {

/// Tokens whose trailing period never ends a sentence.
inline constexpr std::array<std::string_view, 8> kSentenceAbbreviations = {
    "Dr.", "Mr.", "Mrs.", "Ms.", "U.S.", "etc.", "e.g.", "i.e."};

/// Rule-based sentence splitter.
///
/// A boundary is a '.', '!' or '?' followed by whitespace and then an
/// uppercase ASCII letter, unless the whitespace-delimited token ending at the
/// punctuation is one of kSentenceAbbreviations. Sentences are returned
/// trimmed. Throws EmptyInput when `text` is blank.
std::vector<std::string> split_sentences(std::string_view text);

/// Capitalized-token-run heuristic used when no entity list is supplied.
/// Runs of capitalized words become one lowercase entity; a leading
/// function word ("The", "In", ...) is dropped from a run. Order of first
/// appearance is kept and duplicates are removed.
std::vector<std::string> extract_entities(std::string_view text);

std::string to_lower_ascii(std::string_view s);

}  // namespace storyalign
