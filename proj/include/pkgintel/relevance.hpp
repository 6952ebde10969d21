#pragma once

// Keyword gate in front of extraction.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pkgintel/discovery.hpp"
#include "pkgintel/page.hpp"

namespace pkgintel {

inline constexpr std::size_t kDefaultMinCommon = 3;

struct RelevanceDecision {
    bool relevant = false;
    std::set<std::string> matched_common;
    std::set<std::string> matched_special;
    int score = 0;  // |common| + 2 * |special|

    bool operator==(const RelevanceDecision&) const = default;
};

/// Case-insensitive whole-word hits of `keywords` in `text`. A keyword may span
/// several words ("open source"); boundaries are anything but [A-Za-z0-9_-].
std::set<std::string> match_keywords(std::string_view text, const std::vector<std::string>& keywords);

/// Relevant when at least one special keyword and at least `min_common` common
/// keywords occur in the concatenated block text.
RelevanceDecision score_relevance(const PageDocument& doc, const KeywordSet& ks,
                                  std::size_t min_common = kDefaultMinCommon);
RelevanceDecision score_text(std::string_view text, const KeywordSet& ks, std::size_t min_common = kDefaultMinCommon);

/// Keyword set from two list files (see load_keyword_list).
KeywordSet load_keyword_set(const std::string& common_path, const std::string& special_path);

OrderedJson to_json(const RelevanceDecision& d);

}  // namespace pkgintel
