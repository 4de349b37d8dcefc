#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "storyalign/error.hpp"
#include "storyalign/text.hpp"

namespace storyalign {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool ends_with_abbreviation(std::string_view text, std::size_t punct_pos) {
  std::size_t start = punct_pos;
  while (start > 0 && !is_space(text[start - 1])) --start;
  const auto token = text.substr(start, punct_pos - start + 1);
  return std::find(kSentenceAbbreviations.begin(), kSentenceAbbreviations.end(), token) !=
         kSentenceAbbreviations.end();
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  if (trim(text).empty()) throw Error(ErrorKind::EmptyInput, "cannot split empty text");

  std::vector<std::string> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j == i + 1 || j >= text.size() || !is_upper(text[j])) continue;
    if (c == '.' && ends_with_abbreviation(text, i)) continue;
    if (auto s = trim(text.substr(begin, i + 1 - begin)); !s.empty()) out.emplace_back(s);
    begin = j;
  }
  if (auto s = trim(text.substr(begin)); !s.empty()) out.emplace_back(s);
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> extract_entities(std::string_view text) {
  static const std::unordered_set<std::string> kFunctionWords = {
      "the", "a", "an", "in", "on", "at", "it", "he", "she", "they", "we", "this",
      "that", "but", "and", "or", "for", "of", "to", "as", "by", "after", "before"};

  std::vector<std::string> entities;
  std::unordered_set<std::string> seen;
  std::vector<std::string> run;

  auto flush = [&] {
    while (!run.empty() && kFunctionWords.contains(to_lower_ascii(run.front()))) run.erase(run.begin());
    if (!run.empty()) {
      std::string joined;
      for (const auto& w : run) {
        if (!joined.empty()) joined += ' ';
        joined += w;
      }
      auto entity = to_lower_ascii(joined);
      if (seen.insert(entity).second) entities.push_back(std::move(entity));
    }
    run.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::string_view raw = text.substr(i, j - i);
    i = j;
    if (raw.empty()) continue;

    // A trailing comma, colon, etc. ends a run; so does a period, unless the
    // token is an initialism such as "U.S.".
    bool closes = false;
    if (std::ispunct(static_cast<unsigned char>(raw.back())) != 0) {
      closes = raw.back() != '.' || raw.size() < 2 || !is_upper(raw[raw.size() - 2]);
    }
    while (!raw.empty() && std::ispunct(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
    while (!raw.empty() && std::ispunct(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);

    if (!raw.empty() && is_upper(raw.front())) {
      run.emplace_back(raw);
    } else {
      flush();
    }
    if (closes) flush();
  }
  flush();
  return entities;
}

}  // namespace storyalign
