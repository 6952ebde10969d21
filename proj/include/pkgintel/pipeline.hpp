#pragma once

// Stage wiring shared by the command line and the end-to-end tests.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pkgintel/candidates.hpp"
#include "pkgintel/collector.hpp"
#include "pkgintel/discovery.hpp"
#include "pkgintel/ltm.hpp"
#include "pkgintel/relevance.hpp"
#include "pkgintel/store.hpp"

namespace pkgintel {

struct CrawlSummary {
    std::size_t fetched = 0;
    std::size_t skipped_cached = 0;
    std::vector<std::string> failures;  // "url: reason"
};

/// Fetches each approved source's seed pages, selects tagged article links and
/// stores index and article pages (and embedded CSVs) in the cache.
CrawlSummary crawl_sources(const std::vector<SourceDescriptor>& sources, PageCache& cache, Fetcher& fetcher,
                           bool refetch = false);

/// Cache entries whose URL names a .csv resource; they are embedded data, not pages.
bool is_embedded_resource(const std::string& url);

struct PageOutcome {
    std::string url;
    std::string source_id;
    bool skipped_source = false;  // source rejected or a known reprint
    RelevanceDecision relevance;
    std::optional<ReprintFinding> reprint;
    std::size_t candidates = 0;
    std::size_t records = 0;
    std::vector<std::string> dropped;  // removed by grounding
    std::vector<std::string> warnings;
    std::optional<std::string> error;
};

struct ExtractionReport {
    std::vector<PageOutcome> pages;  // cache (URL) order
    std::vector<ReprintFinding> reprints;
    std::vector<IntelRecord> records;
};

struct ExtractionSettings {
    std::size_t min_common = kDefaultMinCommon;
    double reprint_threshold = kDefaultReprintThreshold;
    std::size_t parallelism = 1;
    CandidateOptions candidate_options;
    /// Index pages are collected but carry no article body; skip them.
    bool skip_seed_pages = true;
};

/// Blocks, relevance, reprint check, candidates and three-stage extraction for every
/// cached page. Embedded CSVs are read from the cache only.
ExtractionReport extract_cached_pages(const PageCache& cache, const std::vector<SourceDescriptor>& sources,
                                      const KeywordSet& keywords, const Dictionary& dictionary,
                                      AnalyzerBackend& backend, const PromptSet& prompts,
                                      const ExtractionSettings& settings, MetricsLog* metrics = nullptr);

/// Relevance only, for the `filter` stage.
std::vector<PageOutcome> filter_cached_pages(const PageCache& cache, const KeywordSet& keywords,
                                             std::size_t min_common);

/// Aggregates as JSON Lines, the golden-file format.
std::string aggregates_jsonl(const std::vector<AggregatedIntel>& aggs);

OrderedJson to_json(const PageOutcome& p);

}  // namespace pkgintel
