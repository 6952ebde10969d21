#include "pkgintel/candidates.hpp"

#include <cstdlib>
#include <fstream>

#include "pkgintel/error.hpp"
#include "pkgintel/strings.hpp"

#ifndef PKGINTEL_DEFAULT_DATA_DIR
#define PKGINTEL_DEFAULT_DATA_DIR "data"
#endif

namespace pkgintel {

Dictionary::Dictionary(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
}

void Dictionary::add(std::string_view word) {
    auto t = str::trim(word);
    if (t.empty() || t.front() == '#') return;
    words_.insert(str::to_lower(t));
}

Dictionary Dictionary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read dictionary " + path);
    Dictionary d;
    std::string line;
    while (std::getline(in, line)) d.add(line);
    if (d.empty()) throw Error(ErrorKind::InvalidArgument, "dictionary is empty: " + path);
    return d;
}

Dictionary Dictionary::load_default() { return load(default_data_dir() + "/dictionary.txt"); }

bool Dictionary::contains(std::string_view word) const { return words_.count(str::to_lower(word)) != 0; }

std::string default_data_dir() {
    if (const char* env = std::getenv("PKGINTEL_DATA_DIR"); env && *env) return env;
    return PKGINTEL_DEFAULT_DATA_DIR;
}

namespace {

bool inner_char(char c) { return c == '-' || c == '_' || c == '.' || c == '@' || c == '/'; }

bool token_char(char c) {
    return str::is_alnum(c) || inner_char(c) || static_cast<unsigned char>(c) >= 0x80;
}

bool is_numeral(std::string_view t) {
    bool digit = false;
    for (char c : t) {
        if (str::is_digit(c)) digit = true;
        else if (c != '.' && c != ',' && c != '/' && c != '-' && c != ':') return false;
    }
    return digit;
}

bool has_alnum(std::string_view t) {
    for (char c : t)
        if (str::is_alnum(c) || static_cast<unsigned char>(c) >= 0x80) return true;
    return false;
}

std::string_view strip(std::string_view t) {
    std::size_t b = 0;
    while (b < t.size() && inner_char(t[b]) && t[b] != '@') ++b;
    std::size_t e = t.size();
    while (e > b && inner_char(t[e - 1])) --e;
    return t.substr(b, e - b);
}

}  // namespace

std::vector<std::string> candidate_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !token_char(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && token_char(text[j])) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::set<std::string> extract_candidates(std::string_view text, const Dictionary& dict,
                                         const CandidateOptions& options) {
    std::set<std::string> out;
    for (const auto& raw : candidate_tokens(text)) {
        auto t = strip(raw);
        // "@" alone, or "@" followed only by punctuation, is not a name.
        if (t.empty() || !has_alnum(t)) continue;
        if (t.front() == '@') {
            out.emplace(t);
            continue;
        }
        if (is_numeral(t)) continue;
        if (t.size() < options.min_length) continue;
        if (dict.contains(t)) continue;
        out.emplace(t);
    }
    return out;
}

}  // namespace pkgintel
