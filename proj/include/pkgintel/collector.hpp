#pragma once

// Polite page fetching, the on-disk page cache and typed block extraction.

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pkgintel/http.hpp"
#include "pkgintel/page.hpp"
#include "pkgintel/source.hpp"

namespace pkgintel {

struct FetchResult {
    PageDocument doc;  // blocks empty
    std::string final_url;
    int status = 0;
    int attempts = 0;
    std::string user_agent;
};

/// Fetches under a CrawlPolicy: per-host rate limiting, a random user agent per
/// request, redirect following, retries with exponential backoff.
class Fetcher {
public:
    Fetcher(HttpClient& client, RateLimiter& limiter, Clock& clock, std::uint64_t seed = 0x5eed)
        : client_(client), limiter_(limiter), clock_(clock), rng_(seed) {}

    /// Errors: FetchError Transport (after retries), Throttle (429, carries Retry-After),
    /// PermanentFetch (4xx, bad scheme, redirect loop).
    FetchResult fetch(const std::string& url, const CrawlPolicy& policy);

private:
    std::string pick_user_agent(const CrawlPolicy& policy);

    HttpClient& client_;
    RateLimiter& limiter_;
    Clock& clock_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
};

/// Convenience wrapper with a private system clock and limiter.
PageDocument fetch_page(const std::string& url, const CrawlPolicy& policy, HttpClient& client);

struct CacheEntry {
    std::string url;
    std::string path;  // relative to the cache directory
    Timestamp fetched_at;
    int status = 200;
    std::string source_id;
    std::optional<Timestamp> published_at;
};

/// Content-addressed page store: `<dir>/<sha256(url)>.html` plus `<dir>/index.json`.
class PageCache {
public:
    explicit PageCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::optional<PageDocument> get(const std::string& url) const;
    bool contains(const std::string& url) const;
    void put(const PageDocument& doc, int status = 200);
    /// Entries in URL order.
    std::vector<CacheEntry> entries() const;
    std::vector<PageDocument> pages() const;

private:
    void save_index() const;

    std::filesystem::path dir_;
    std::map<std::string, CacheEntry> index_;
};

/// Registers pre-rendered markup (e.g. from an external browser) under `url`.
PageDocument import_rendered_page(PageCache& cache, const std::filesystem::path& markup_file, const std::string& url,
                                  const std::string& source_id, Timestamp fetched_at);

/// Fetches embedded resources (iframe targets) during block extraction.
using EmbeddedFetcher = std::function<std::optional<std::string>(const std::string& url)>;

struct ExtractOptions {
    bool fetch_embedded = false;
    EmbeddedFetcher fetcher;
};

struct ExtractResult {
    PageDocument doc;
    std::vector<std::string> warnings;
};

/// Paragraphs, code, h1-h3, tables (cells), lists (newline-joined items) and, with
/// fetch_embedded, iframes pointing at .csv files. Script/style/nav/footer excluded.
ExtractResult extract_blocks(PageDocument doc, const ExtractOptions& options = {});

/// Article links on an index page whose anchor text, URL path or enclosing entry
/// matches one of the source's collection tags (case-insensitive).
/// Throws Error(InvalidArgument) unless the source is approved with tags.
std::vector<std::string> select_collection_pages(const SourceDescriptor& source, const PageDocument& index_doc);

/// Publication time from <meta property="article:published_time"> or <time datetime>.
std::optional<Timestamp> extract_published_time(std::string_view markup);

}  // namespace pkgintel
