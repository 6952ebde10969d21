#pragma once

// Builds the page cache for the committed mock-site corpus and runs the offline
// stages over it. Shared by the unit and acceptance binaries.

#include <filesystem>
#include <string>
#include <vector>

#include "pkgintel/aggregator.hpp"
#include "pkgintel/candidates.hpp"
#include "pkgintel/collector.hpp"
#include "pkgintel/deterministic_backend.hpp"
#include "pkgintel/pipeline.hpp"
#include "pkgintel/store.hpp"

namespace fixture {

inline std::filesystem::path dir() { return PKGINTEL_FIXTURE_DIR; }
inline std::filesystem::path site_root() { return dir() / "site"; }
inline std::filesystem::path sources_file() { return dir() / "pipeline" / "sources.jsonl"; }
inline std::filesystem::path golden_file() { return dir() / "pipeline" / "golden_aggregates.jsonl"; }

// 2024-01-15T00:00:00Z; every page is collected after its publication date.
inline constexpr std::int64_t kCrawlStart = 1705276800;

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("pkgintel-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline pkgintel::CrawlSummary crawl_site(const std::filesystem::path& cache_dir, pkgintel::HttpClient* wrap = nullptr) {
    pkgintel::DirectoryHttpClient site(site_root());
    pkgintel::ManualClock clock(pkgintel::Timestamp{kCrawlStart});
    pkgintel::RateLimiter limiter(clock);
    pkgintel::Fetcher fetcher(wrap ? *wrap : site, limiter, clock);
    pkgintel::PageCache cache(cache_dir);
    return pkgintel::crawl_sources(pkgintel::read_sources_jsonl(sources_file().string()), cache, fetcher);
}

struct Run {
    pkgintel::ExtractionReport report;
    std::vector<pkgintel::AggregatedIntel> aggregates;
    std::string jsonl;
};

inline Run extract_and_aggregate(const std::filesystem::path& cache_dir, std::size_t parallelism = 1) {
    pkgintel::PageCache cache(cache_dir);
    pkgintel::DeterministicBackend backend;
    pkgintel::ExtractionSettings settings;
    settings.parallelism = parallelism;
    Run r;
    r.report = pkgintel::extract_cached_pages(cache, pkgintel::read_sources_jsonl(sources_file().string()),
                                              pkgintel::KeywordSet::defaults(), pkgintel::Dictionary::load_default(),
                                              backend, pkgintel::PromptSet::load_default(), settings);
    r.aggregates = pkgintel::aggregate_all(r.report.records);
    r.jsonl = pkgintel::aggregates_jsonl(r.aggregates);
    return r;
}

}  // namespace fixture
