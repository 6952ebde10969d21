#include "pkgintel/pipeline.hpp"

#include <future>
#include <map>

#include "pkgintel/html.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

bool is_embedded_resource(const std::string& url) {
    auto u = parse_url(url);
    return u && str::ends_with_icase(u->path, ".csv");
}

namespace {

std::optional<std::string> csv_target(const std::string& page_url, const std::string& src) {
    auto base = parse_url(page_url);
    if (!base) return std::nullopt;
    auto t = resolve_url(*base, src);
    if (!t || !str::ends_with_icase(t->path, ".csv")) return std::nullopt;
    return t->str();
}

std::vector<std::string> iframe_sources(const std::string& markup) {
    std::vector<std::string> out;
    auto doc = html::parse(markup);
    html::walk(doc.root, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (n.is_element("iframe"))
            if (const auto* s = n.attr("src")) out.push_back(*s);
        return true;
    });
    return out;
}

}  // namespace

CrawlSummary crawl_sources(const std::vector<SourceDescriptor>& sources, PageCache& cache, Fetcher& fetcher,
                           bool refetch) {
    CrawlSummary sum;
    auto fetch_into_cache = [&](const std::string& url, const SourceDescriptor& src) -> std::optional<PageDocument> {
        if (!refetch && cache.contains(url)) {
            ++sum.skipped_cached;
            return cache.get(url);
        }
        try {
            auto res = fetcher.fetch(url, src.crawl_policy);
            res.doc.source_id = src.source_id;
            cache.put(res.doc, res.status);
            ++sum.fetched;
            return res.doc;
        } catch (const Error& e) {
            sum.failures.push_back(url + ": " + e.what());
            log::warn("crawl: " + url + ": " + e.what());
            return std::nullopt;
        }
    };
    for (const auto& src : sources) {
        if (src.status != SourceStatus::Approved) continue;
        for (const auto& seed : src.seed_urls) {
            auto index = fetch_into_cache(seed, src);
            if (!index) continue;
            std::vector<std::string> articles = select_collection_pages(src, *index);
            for (const auto& a : articles) {
                auto page = fetch_into_cache(a, src);
                if (!page) continue;
                for (const auto& s : iframe_sources(page->raw_markup))
                    if (auto t = csv_target(page->url, s)) fetch_into_cache(*t, src);
            }
        }
    }
    return sum;
}

namespace {

struct Prepared {
    PageDocument doc;
    PageOutcome outcome;
    const SourceDescriptor* source = nullptr;
};

}  // namespace

ExtractionReport extract_cached_pages(const PageCache& cache, const std::vector<SourceDescriptor>& sources,
                                      const KeywordSet& keywords, const Dictionary& dictionary,
                                      AnalyzerBackend& backend, const PromptSet& prompts,
                                      const ExtractionSettings& settings, MetricsLog* metrics) {
    std::map<std::string, const SourceDescriptor*> by_id;
    std::set<std::string> seeds;
    for (const auto& s : sources) {
        by_id[s.source_id] = &s;
        seeds.insert(s.seed_urls.begin(), s.seed_urls.end());
    }
    static const SourceDescriptor unknown_source;

    ExtractOptions opts;
    opts.fetch_embedded = true;
    opts.fetcher = [&cache](const std::string& url) -> std::optional<std::string> {
        auto d = cache.get(url);
        if (!d) return std::nullopt;
        return d->raw_markup;
    };

    std::vector<Prepared> prepared;
    for (const auto& entry : cache.entries()) {
        if (is_embedded_resource(entry.url)) continue;
        if (settings.skip_seed_pages && seeds.count(entry.url)) continue;
        Prepared p;
        p.outcome.url = entry.url;
        p.outcome.source_id = entry.source_id;
        auto it = by_id.find(entry.source_id);
        p.source = it == by_id.end() ? &unknown_source : it->second;
        if (it != by_id.end() &&
            (it->second->status == SourceStatus::Rejected || it->second->status == SourceStatus::Reprint)) {
            p.outcome.skipped_source = true;
            prepared.push_back(std::move(p));
            continue;
        }
        auto extracted = extract_blocks(*cache.get(entry.url), opts);
        p.doc = std::move(extracted.doc);
        p.outcome.warnings = std::move(extracted.warnings);
        p.outcome.relevance = score_relevance(p.doc, keywords, settings.min_common);
        prepared.push_back(std::move(p));
    }

    ExtractionReport report;
    std::vector<PageDocument> relevant_docs;
    for (const auto& p : prepared)
        if (!p.outcome.skipped_source && p.outcome.relevance.relevant) relevant_docs.push_back(p.doc);
    report.reprints = find_reprints(relevant_docs, settings.reprint_threshold);
    std::map<std::string, ReprintFinding> reprint_of;
    for (const auto& f : report.reprints) reprint_of.emplace(f.reprint_url, f);

    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        auto& p = prepared[i];
        if (p.outcome.skipped_source || !p.outcome.relevance.relevant) continue;
        if (auto it = reprint_of.find(p.outcome.url); it != reprint_of.end()) {
            p.outcome.reprint = it->second;
            continue;
        }
        work.push_back(i);
    }

    std::vector<std::vector<IntelRecord>> records(prepared.size());
    auto run_one = [&](std::size_t i) {
        auto& p = prepared[i];
        try {
            const auto candidates =
                extract_candidates(analysis_text(p.doc), dictionary, settings.candidate_options);
            p.outcome.candidates = candidates.size();
            LtmExtractor ltm(backend, prompts, metrics);
            auto out = ltm.run(p.doc, candidates, *p.source);
            p.outcome.dropped = out.dropped;
            p.outcome.records = out.records.size();
            records[i] = std::move(out.records);
        } catch (const std::exception& e) {
            p.outcome.error = e.what();
            log::error("extract: " + p.outcome.url + ": " + e.what());
        }
    };
    const std::size_t par = std::max<std::size_t>(1, settings.parallelism);
    for (std::size_t start = 0; start < work.size(); start += par) {
        std::vector<std::future<void>> batch;
        for (std::size_t k = start; k < std::min(work.size(), start + par); ++k)
            batch.push_back(std::async(par == 1 ? std::launch::deferred : std::launch::async, run_one, work[k]));
        for (auto& f : batch) f.get();
    }

    for (std::size_t i = 0; i < prepared.size(); ++i) {
        report.pages.push_back(std::move(prepared[i].outcome));
        report.records.insert(report.records.end(), records[i].begin(), records[i].end());
    }
    return report;
}

std::vector<PageOutcome> filter_cached_pages(const PageCache& cache, const KeywordSet& keywords,
                                             std::size_t min_common) {
    std::vector<PageOutcome> out;
    ExtractOptions opts;
    opts.fetch_embedded = true;
    opts.fetcher = [&cache](const std::string& url) -> std::optional<std::string> {
        auto d = cache.get(url);
        if (!d) return std::nullopt;
        return d->raw_markup;
    };
    for (const auto& entry : cache.entries()) {
        if (is_embedded_resource(entry.url)) continue;
        PageOutcome p;
        p.url = entry.url;
        p.source_id = entry.source_id;
        auto ex = extract_blocks(*cache.get(entry.url), opts);
        p.relevance = score_relevance(ex.doc, keywords, min_common);
        out.push_back(std::move(p));
    }
    return out;
}

std::string aggregates_jsonl(const std::vector<AggregatedIntel>& aggs) {
    std::string out;
    for (const auto& a : aggs) out += to_jsonl_line(a);
    return out;
}

OrderedJson to_json(const PageOutcome& p) {
    OrderedJson j;
    j["url"] = p.url;
    j["source_id"] = p.source_id;
    j["skipped_source"] = p.skipped_source;
    j["relevance"] = to_json(p.relevance);
    j["reprint_of"] = p.reprint ? OrderedJson(p.reprint->original_url) : OrderedJson(nullptr);
    j["similarity"] = p.reprint ? OrderedJson(p.reprint->similarity) : OrderedJson(nullptr);
    j["candidates"] = p.candidates;
    j["records"] = p.records;
    j["dropped"] = p.dropped;
    j["warnings"] = p.warnings;
    j["error"] = p.error ? OrderedJson(*p.error) : OrderedJson(nullptr);
    return j;
}

}  // namespace pkgintel
