#include "pkgintel/relevance.hpp"

#include "pkgintel/strings.hpp"

namespace pkgintel {

namespace {

bool word_char(char c) { return str::is_alnum(c) || c == '_' || c == '-' || static_cast<unsigned char>(c) >= 0x80; }

bool has_word(std::string_view lowered_text, std::string_view kw) {
    if (kw.empty()) return false;
    std::size_t pos = 0;
    while ((pos = lowered_text.find(kw, pos)) != std::string_view::npos) {
        const bool left = pos == 0 || !word_char(lowered_text[pos - 1]);
        const std::size_t end = pos + kw.size();
        const bool right = end >= lowered_text.size() || !word_char(lowered_text[end]);
        if (left && right) return true;
        ++pos;
    }
    return false;
}

}  // namespace

std::set<std::string> match_keywords(std::string_view text, const std::vector<std::string>& keywords) {
    const std::string lowered = str::to_lower(text);
    std::set<std::string> out;
    for (const auto& kw : keywords) {
        auto k = str::to_lower(str::trim(kw));
        if (!k.empty() && has_word(lowered, k)) out.insert(k);
    }
    return out;
}

RelevanceDecision score_text(std::string_view text, const KeywordSet& ks, std::size_t min_common) {
    RelevanceDecision d;
    d.matched_common = match_keywords(text, ks.common);
    d.matched_special = match_keywords(text, std::vector<std::string>(ks.special.begin(), ks.special.end()));
    d.score = static_cast<int>(d.matched_common.size() + 2 * d.matched_special.size());
    d.relevant = !d.matched_special.empty() && d.matched_common.size() >= min_common;
    return d;
}

RelevanceDecision score_relevance(const PageDocument& doc, const KeywordSet& ks, std::size_t min_common) {
    return score_text(document_text(doc), ks, min_common);
}

KeywordSet load_keyword_set(const std::string& common_path, const std::string& special_path) {
    auto special = load_keyword_list(special_path);
    return KeywordSet::make(load_keyword_list(common_path), std::set<std::string>(special.begin(), special.end()));
}

OrderedJson to_json(const RelevanceDecision& d) {
    OrderedJson j;
    j["relevant"] = d.relevant;
    j["score"] = d.score;
    j["matched_common"] = d.matched_common;
    j["matched_special"] = d.matched_special;
    return j;
}

}  // namespace pkgintel
