#pragma once

// Source identification: search query construction, result harvesting, domain
// frequency filtering, outbound-link snowballing, reprint detection, TF-IDF
// keyword ranking and the human review queue.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pkgintel/http.hpp"
#include "pkgintel/page.hpp"
#include "pkgintel/source.hpp"

namespace pkgintel {

/// The 17 intelligence-related common keywords, in published order.
const std::vector<std::string>& default_common_keywords();

struct KeywordSet {
    std::vector<std::string> common;
    std::set<std::string> special;

    /// Lowercases, drops blanks and duplicates, checks disjointness. Throws Error(InvalidArgument).
    static KeywordSet make(std::vector<std::string> common, std::set<std::string> special);
    /// Built-in common keywords plus ecosystem names ("pypi", "npm") and the given package names as specials.
    static KeywordSet defaults(const std::vector<std::string>& package_names = {});
    bool empty() const { return common.empty() && special.empty(); }
};

/// One keyword per line; '#' starts a comment; blank lines ignored.
std::vector<std::string> load_keyword_list(const std::string& path);

/// One query per name: the quoted name (mandatory) followed by the common keywords.
/// Throws Error(InvalidArgument) on an empty name list.
std::vector<std::string> build_queries(const std::vector<std::string>& package_names, const KeywordSet& ks);

/// Implementations must tolerate concurrent search() calls.
class SearchClient {
public:
    virtual ~SearchClient() = default;
    /// Raw hits in rank order; may contain duplicates and more than `limit` items.
    /// Throws FetchError: Transport (retryable) or Throttle (quota).
    virtual std::vector<std::string> search(const std::string& query, std::size_t limit) = 0;
};

/// Fixture-backed search: a JSON object mapping query -> ordered URL list.
class CannedSearchClient final : public SearchClient {
public:
    explicit CannedSearchClient(std::map<std::string, std::vector<std::string>> results)
        : results_(std::move(results)) {}
    static CannedSearchClient from_file(const std::string& path);

    std::vector<std::string> search(const std::string& query, std::size_t limit) override;

private:
    std::map<std::string, std::vector<std::string>> results_;
};

struct WebSearchConfig {
    std::string endpoint = "https://www.googleapis.com/customsearch/v1";
    std::string api_key;
    std::string engine_id;
    std::size_t page_size = 10;

    /// PKGINTEL_SEARCH_ENDPOINT, PKGINTEL_SEARCH_API_KEY, PKGINTEL_SEARCH_ENGINE_ID.
    static WebSearchConfig from_env();
};

/// Custom-search style JSON API (`items[].link`), paged by `start`.
class WebSearchClient final : public SearchClient {
public:
    WebSearchClient(WebSearchConfig config, HttpClient& http) : config_(std::move(config)), http_(http) {}

    std::vector<std::string> search(const std::string& query, std::size_t limit) override;

private:
    WebSearchConfig config_;
    HttpClient& http_;
};

/// At most `limit` unique URLs, first-rank order. Throws Error(InvalidArgument) for limit 0.
std::vector<std::string> harvest_results(const std::string& query, SearchClient& client, std::size_t limit = 100);

struct HarvestOutcome {
    std::string query;
    std::vector<std::string> urls;
    std::optional<std::string> error;
};

/// Runs harvest_results for each query with at most `parallelism` in flight.
/// Results come back in query order; failures are reported per query.
std::vector<HarvestOutcome> harvest_all(const std::vector<std::string>& queries, SearchClient& client,
                                        std::size_t limit = 100, std::size_t parallelism = 4);

struct DomainTally {
    std::map<std::string, std::size_t> counts;
    std::size_t skipped = 0;  // malformed URLs

    bool operator==(const DomainTally& o) const { return counts == o.counts; }
};

/// Counts normalized domains and keeps those appearing strictly more than `threshold` times.
DomainTally tally_and_filter_domains(const std::vector<std::string>& urls, std::size_t threshold = 10);

/// Absolute, de-duplicated http(s) links inside the main article body.
std::vector<std::string> extract_outbound_links(const PageDocument& page);

inline constexpr double kDefaultReprintThreshold = 0.8;
inline constexpr std::size_t kShingleSize = 5;

/// Lowercase alphanumeric tokens of the page body (blocks, else markup text).
std::vector<std::string> body_tokens(const PageDocument& page);
/// Contiguous `size`-token windows. Shorter token lists yield one shingle.
std::set<std::string> shingles(const std::vector<std::string>& tokens, std::size_t size = kShingleSize);
/// Jaccard similarity of 5-word shingle sets; 0 when either body is empty.
double detect_reprint(const PageDocument& a, const PageDocument& b);

/// Bundled English stopword list.
const std::set<std::string>& stopwords();
std::vector<std::string> tokenize_for_keywords(std::string_view text);

/// Per document, the k terms with the highest tf*idf with tf = count / length and
/// idf = ln((1 + N) / (1 + df)) + 1. Ties are broken lexicographically.
std::vector<std::vector<std::string>> tfidf_keywords(const std::vector<std::string>& corpus, std::size_t k = 10);

struct ReprintFinding {
    std::string original_url;
    std::string reprint_url;
    std::string reprint_source_id;
    double similarity = 0.0;
};

/// Compares every page pair from different sources; the later-published page of a
/// pair at or above `threshold` is reported as the reprint.
std::vector<ReprintFinding> find_reprints(const std::vector<PageDocument>& pages,
                                          double threshold = kDefaultReprintThreshold);

/// Sets status=reprint on the sources named by the findings.
void mark_reprints(std::vector<SourceDescriptor>& sources, const std::vector<ReprintFinding>& findings);

/// Candidate descriptors (status=candidate) for every domain in the tally, in domain order.
std::vector<SourceDescriptor> build_review_queue(const DomainTally& tally, const KeywordSet& ks);

/// Reviewer action. Approval requires at least one collection tag. Throws Error(InvalidArgument)
/// for an unknown id.
void review_source(std::vector<SourceDescriptor>& queue, const std::string& source_id, SourceStatus decision,
                   const std::set<std::string>& tags = {});

}  // namespace pkgintel
