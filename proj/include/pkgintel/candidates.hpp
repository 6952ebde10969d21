#pragma once

// Dictionary-based potential package name extraction.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace pkgintel {

class Dictionary {
public:
    Dictionary() = default;
    /// Words are lowercased; blanks and '#' lines ignored.
    explicit Dictionary(const std::vector<std::string>& words);
    /// One word per line, UTF-8. Throws Error(Io) if unreadable, Error(InvalidArgument) if empty.
    static Dictionary load(const std::string& path);
    /// `<data dir>/dictionary.txt`, data dir from PKGINTEL_DATA_DIR or the build default.
    static Dictionary load_default();

    bool contains(std::string_view word) const;
    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    void add(std::string_view word);

private:
    std::unordered_set<std::string> words_;
};

struct CandidateOptions {
    std::size_t min_length = 3;
};

/// Raw word blocks: split on whitespace and punctuation other than - _ . @ /.
std::vector<std::string> candidate_tokens(std::string_view text);

/// Tokens that are not dictionary words, not numerals, at least min_length long.
/// '@'-prefixed tokens are always kept. Original case preserved.
std::set<std::string> extract_candidates(std::string_view text, const Dictionary& dict,
                                         const CandidateOptions& options = {});

/// Data directory for bundled word lists, prompts and keyword files.
std::string default_data_dir();

}  // namespace pkgintel
