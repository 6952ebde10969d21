#include "pkgintel/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include "pkgintel/aggregator.hpp"
#include "pkgintel/api.hpp"
#include "pkgintel/candidates.hpp"
#include "pkgintel/collector.hpp"
#include "pkgintel/config.hpp"
#include "pkgintel/deterministic_backend.hpp"
#include "pkgintel/discovery.hpp"
#include "pkgintel/error.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/mirror.hpp"
#include "pkgintel/pipeline.hpp"
#include "pkgintel/relevance.hpp"
#include "pkgintel/remote_backend.hpp"
#include "pkgintel/store.hpp"
#include "pkgintel/strings.hpp"

namespace fs = std::filesystem;

namespace pkgintel {

namespace {

struct Flags {
    std::string config_file;
    std::string store_dir, cache_dir, sources_file, dictionary, backend, prompts_dir, mirrors_file, metrics_log;
    std::optional<std::size_t> min_common;
    std::optional<double> rate;
    std::optional<std::size_t> parallelism;
    bool offline = false;
    bool json = false;
    bool print_config = false;
    std::string log_level = "info";
};

log::Level parse_level(const std::string& s) {
    if (s == "debug") return log::Level::Debug;
    if (s == "info") return log::Level::Info;
    if (s == "warn") return log::Level::Warn;
    if (s == "error") return log::Level::Error;
    if (s == "off") return log::Level::Off;
    throw Error(ErrorKind::InvalidArgument, "unknown log level " + s);
}

PipelineConfig effective_config(const Flags& f, const std::map<std::string, std::string>& env) {
    PipelineConfig cfg;
    if (!f.config_file.empty()) cfg = load_config_file(f.config_file, cfg);
    cfg = apply_environment(cfg, env);
    if (!f.store_dir.empty()) cfg.store_dir = f.store_dir;
    if (!f.cache_dir.empty()) cfg.cache_dir = f.cache_dir;
    if (!f.sources_file.empty()) cfg.sources_file = f.sources_file;
    if (!f.dictionary.empty()) cfg.dictionary = f.dictionary;
    if (!f.prompts_dir.empty()) cfg.prompts_dir = f.prompts_dir;
    if (!f.mirrors_file.empty()) cfg.mirrors_file = f.mirrors_file;
    if (!f.metrics_log.empty()) cfg.metrics_log = f.metrics_log;
    if (!f.backend.empty()) cfg.backend = parse_backend_choice(f.backend);
    if (f.min_common) cfg.min_common = *f.min_common;
    if (f.rate) cfg.policy.max_requests_per_second = *f.rate;
    if (f.parallelism) cfg.search_parallelism = cfg.extract_parallelism = cfg.mirror_parallelism = *f.parallelism;
    if (f.offline) cfg.offline = true;
    return cfg;
}

class Context {
public:
    Context(PipelineConfig cfg, const CliServices& svc, bool json)
        : cfg(std::move(cfg)), json(json), out(svc.out ? *svc.out : std::cout), svc_(svc) {}

    PipelineConfig cfg;
    bool json;
    std::ostream& out;

    HttpClient& http() {
        if (cfg.offline) return offline_;
        if (svc_.http) return *svc_.http;
        if (!net_) net_ = std::make_unique<NetworkHttpClient>();
        return *net_;
    }
    Clock& clock() { return svc_.clock ? *svc_.clock : system_clock_; }
    RateLimiter& limiter() {
        if (!limiter_) limiter_ = std::make_unique<RateLimiter>(clock());
        return *limiter_;
    }

    std::vector<SourceDescriptor> sources() const {
        if (!fs::exists(cfg.sources_file)) return {};
        return read_sources_jsonl(cfg.sources_file.string());
    }

    KeywordSet keywords() const {
        std::vector<std::string> common = cfg.common_keywords.empty() ? default_common_keywords()
                                                                      : load_keyword_list(cfg.common_keywords.string());
        std::set<std::string> special{"pypi", "npm"};
        if (!cfg.special_keywords.empty()) {
            auto list = load_keyword_list(cfg.special_keywords.string());
            special = {list.begin(), list.end()};
        }
        return KeywordSet::make(std::move(common), std::move(special));
    }

    std::unique_ptr<AnalyzerBackend> backend() {
        if (cfg.backend == BackendChoice::Remote) {
            if (cfg.offline) throw Error(ErrorKind::InvalidArgument, "the remote backend cannot run with --offline");
            return std::make_unique<RemoteBackend>(RemoteBackendConfig::from_env(), http());
        }
        return std::make_unique<DeterministicBackend>();
    }

    std::size_t offline_attempts() const { return offline_.attempts(); }

private:
    const CliServices& svc_;
    OfflineHttpClient offline_;
    std::unique_ptr<NetworkHttpClient> net_;
    SystemClock system_clock_;
    std::unique_ptr<RateLimiter> limiter_;
};

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> out;
    for (const auto& line : str::split(read_file(path), '\n')) {
        auto t = str::trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.emplace_back(t);
    }
    return out;
}

// ---- discover

struct DiscoverOpts {
    std::string names_file, canned_file;
    std::optional<std::size_t> threshold, limit;
    bool snowball = false;
    std::size_t tfidf = 0;
    std::string approve, reject;
    std::vector<std::string> tags, seeds;
};

int cmd_discover(Context& ctx, const DiscoverOpts& o) {
    auto sources = ctx.sources();
    if (!o.approve.empty() || !o.reject.empty()) {
        if (!o.approve.empty()) {
            review_source(sources, o.approve, SourceStatus::Approved, {o.tags.begin(), o.tags.end()});
            for (auto& s : sources)
                if (s.source_id == o.approve && !o.seeds.empty()) s.seed_urls = o.seeds;
        }
        if (!o.reject.empty()) review_source(sources, o.reject, SourceStatus::Rejected);
        write_sources_jsonl(ctx.cfg.sources_file.string(), sources);
        for (const auto& s : sources)
            if (s.source_id == o.approve || s.source_id == o.reject) {
                if (ctx.json) ctx.out << to_json(s).dump() << '\n';
                else ctx.out << s.source_id << ": " << to_string(s.status) << '\n';
            }
        return kExitOk;
    }

    if (o.tfidf > 0) {
        PageCache cache(ctx.cfg.cache_dir);
        std::vector<std::string> urls, corpus;
        for (const auto& e : cache.entries()) {
            if (is_embedded_resource(e.url)) continue;
            urls.push_back(e.url);
            corpus.push_back(analysis_text(extract_blocks(*cache.get(e.url)).doc));
        }
        auto top = tfidf_keywords(corpus, o.tfidf);
        for (std::size_t i = 0; i < urls.size(); ++i) {
            if (ctx.json) {
                OrderedJson j;
                j["url"] = urls[i];
                j["keywords"] = top[i];
                ctx.out << j.dump() << '\n';
            } else {
                ctx.out << urls[i] << ": " << str::join(top[i], ", ") << '\n';
            }
        }
        return kExitOk;
    }

    if (o.names_file.empty()) throw Error(ErrorKind::InvalidArgument, "discover needs --names, --approve, --reject or --tfidf");
    const auto names = read_lines(o.names_file);
    const auto ks = ctx.keywords();
    const auto queries = build_queries(names, ks);

    std::unique_ptr<SearchClient> client;
    if (!o.canned_file.empty()) {
        client = std::make_unique<CannedSearchClient>(CannedSearchClient::from_file(o.canned_file));
    } else {
        if (ctx.cfg.offline) throw Error(ErrorKind::InvalidArgument, "discover --offline needs --canned results");
        client = std::make_unique<WebSearchClient>(WebSearchConfig::from_env(), ctx.http());
    }
    const std::size_t limit = o.limit.value_or(ctx.cfg.search_limit);
    auto harvests = harvest_all(queries, *client, limit, ctx.cfg.search_parallelism);

    std::vector<std::string> urls;
    std::size_t failed = 0;
    for (const auto& h : harvests) {
        if (h.error) {
            ++failed;
            log::warn("discover: query failed: " + h.query + ": " + *h.error);
        }
        urls.insert(urls.end(), h.urls.begin(), h.urls.end());
    }
    if (o.snowball) {
        PageCache cache(ctx.cfg.cache_dir);
        for (const auto& page : cache.pages()) {
            auto links = extract_outbound_links(extract_blocks(page).doc);
            urls.insert(urls.end(), links.begin(), links.end());
        }
    }
    auto tally = tally_and_filter_domains(urls, o.threshold.value_or(ctx.cfg.domain_threshold));
    auto queue = build_review_queue(tally, ks);

    std::set<std::string> known;
    for (const auto& s : sources) known.insert(s.source_id);
    std::size_t added = 0;
    for (auto& s : queue)
        if (known.insert(s.source_id).second) {
            sources.push_back(s);
            ++added;
        }
    if (!ctx.cfg.sources_file.parent_path().empty()) fs::create_directories(ctx.cfg.sources_file.parent_path());
    write_sources_jsonl(ctx.cfg.sources_file.string(), sources);
    log::info("stage=discover queries=" + std::to_string(queries.size()) + " failed=" + std::to_string(failed) +
              " urls=" + std::to_string(urls.size()) + " domains=" + std::to_string(tally.counts.size()) +
              " added=" + std::to_string(added));

    for (const auto& s : queue) {
        if (ctx.json) ctx.out << to_json(s).dump() << '\n';
        else ctx.out << s.source_id << '\t' << tally.counts.at(s.domain) << '\t' << to_string(s.category) << '\n';
    }
    return failed == queries.size() && !queries.empty() ? kExitFailure : kExitOk;
}

// ---- crawl

struct CrawlOpts {
    std::string import_file, url, source_id;
    bool refetch = false;
};

int cmd_crawl(Context& ctx, const CrawlOpts& o) {
    PageCache cache(ctx.cfg.cache_dir);
    if (!o.import_file.empty()) {
        if (o.url.empty()) throw Error(ErrorKind::InvalidArgument, "--import-file needs --url");
        auto doc = import_rendered_page(cache, o.import_file, o.url, o.source_id, ctx.clock().wall_now());
        log::info("stage=crawl imported=" + doc.url);
        if (ctx.json) {
            OrderedJson j;
            j["imported"] = doc.url;
            ctx.out << j.dump() << '\n';
        } else {
            ctx.out << "imported " << doc.url << '\n';
        }
        return kExitOk;
    }
    auto sources = ctx.sources();
    Fetcher fetcher(ctx.http(), ctx.limiter(), ctx.clock());
    auto sum = crawl_sources(sources, cache, fetcher, o.refetch);
    log::info("stage=crawl fetched=" + std::to_string(sum.fetched) + " cached=" + std::to_string(sum.skipped_cached) +
              " failed=" + std::to_string(sum.failures.size()));
    if (ctx.json) {
        OrderedJson j;
        j["fetched"] = sum.fetched;
        j["cached"] = sum.skipped_cached;
        j["failures"] = sum.failures;
        ctx.out << j.dump() << '\n';
    } else {
        ctx.out << "fetched " << sum.fetched << ", already cached " << sum.skipped_cached << ", failed "
                << sum.failures.size() << '\n';
        for (const auto& f : sum.failures) ctx.out << "  " << f << '\n';
    }
    return !sum.failures.empty() && sum.fetched == 0 && sum.skipped_cached == 0 ? kExitFailure : kExitOk;
}

// ---- filter

int cmd_filter(Context& ctx) {
    PageCache cache(ctx.cfg.cache_dir);
    auto pages = filter_cached_pages(cache, ctx.keywords(), ctx.cfg.min_common);
    std::size_t relevant = 0;
    for (const auto& p : pages) {
        relevant += p.relevance.relevant;
        if (ctx.json) {
            OrderedJson j;
            j["url"] = p.url;
            j["source_id"] = p.source_id;
            j["relevance"] = to_json(p.relevance);
            ctx.out << j.dump() << '\n';
        } else {
            ctx.out << (p.relevance.relevant ? "relevant  " : "irrelevant") << "  score=" << p.relevance.score << "  "
                    << p.url << '\n';
        }
    }
    log::info("stage=filter pages=" + std::to_string(pages.size()) + " relevant=" + std::to_string(relevant));
    return kExitOk;
}

// ---- extract

struct ExtractOpts {
    std::string report_file;
};

int cmd_extract(Context& ctx, const ExtractOpts& o) {
    PageCache cache(ctx.cfg.cache_dir);
    fs::create_directories(ctx.cfg.store_dir);
    StoreLock lock(ctx.cfg.store_dir);
    auto store = IntelStore::open(ctx.cfg.store_dir);

    auto dict = Dictionary::load(ctx.cfg.dictionary_path().string());
    auto prompts = PromptSet::load(ctx.cfg.prompts_path());
    auto backend = ctx.backend();
    std::unique_ptr<MetricsLog> metrics;
    if (!ctx.cfg.metrics_log.empty()) metrics = std::make_unique<MetricsLog>(ctx.cfg.metrics_log);

    ExtractionSettings settings;
    settings.min_common = ctx.cfg.min_common;
    settings.reprint_threshold = ctx.cfg.reprint_threshold;
    settings.parallelism = ctx.cfg.extract_parallelism;
    settings.candidate_options.min_length = ctx.cfg.min_candidate_length;

    auto report = extract_cached_pages(cache, ctx.sources(), ctx.keywords(), dict, *backend, prompts, settings,
                                       metrics.get());
    const auto appended = store.ingest(report.records);

    std::size_t relevant = 0, errors = 0;
    std::string lines;
    for (const auto& p : report.pages) {
        relevant += p.relevance.relevant;
        errors += p.error.has_value();
        lines += to_json(p).dump() + "\n";
    }
    if (!o.report_file.empty()) write_file_atomic(o.report_file, lines);
    log::info("stage=extract pages=" + std::to_string(report.pages.size()) + " relevant=" +
              std::to_string(relevant) + " reprints=" + std::to_string(report.reprints.size()) + " records=" +
              std::to_string(report.records.size()) + " appended=" + std::to_string(appended) + " errors=" +
              std::to_string(errors));
    if (ctx.json) {
        ctx.out << lines;
    } else {
        for (const auto& p : report.pages) {
            std::string state = p.skipped_source        ? "skipped"
                                : p.error               ? "error"
                                : !p.relevance.relevant ? "irrelevant"
                                : p.reprint             ? "reprint"
                                                        : "extracted";
            ctx.out << state << '\t' << p.records << '\t' << p.url;
            if (p.reprint) ctx.out << "  (copy of " << p.reprint->original_url << ")";
            if (p.error) ctx.out << "  " << *p.error;
            ctx.out << '\n';
        }
        ctx.out << report.records.size() << " records, " << appended << " new\n";
    }
    return errors > 0 ? kExitFailure : kExitOk;
}

// ---- aggregate

int cmd_aggregate(Context& ctx, const std::string& out_file) {
    fs::create_directories(ctx.cfg.store_dir);
    StoreLock lock(ctx.cfg.store_dir);
    auto store = IntelStore::open(ctx.cfg.store_dir);
    store.save_snapshot();
    if (!out_file.empty()) write_file_atomic(out_file, aggregates_jsonl(store.all()));
    const auto m = store.meta();
    log::info("stage=aggregate packages=" + std::to_string(m.record_count) + " sources=" +
              std::to_string(m.source_count) + " log_records=" + std::to_string(m.log_records));
    if (ctx.json) {
        ctx.out << store.snapshot_json()["metadata"].dump() << '\n';
    } else {
        ctx.out << m.record_count << " packages from " << m.source_count << " sources (" << m.log_records
                << " records)\n";
    }
    return kExitOk;
}

// ---- export

struct ExportOpts {
    std::string out_dir = "pkgintel-data/osv";
    std::string import_dir;
};

int cmd_export(Context& ctx, const ExportOpts& o) {
    if (!o.import_dir.empty()) {
        fs::create_directories(ctx.cfg.store_dir);
        StoreLock lock(ctx.cfg.store_dir);
        auto store = IntelStore::open(ctx.cfg.store_dir);
        auto advisories = import_osv(o.import_dir);
        for (const auto& a : advisories) store.upsert(a);
        store.save_snapshot();
        log::info("stage=export imported=" + std::to_string(advisories.size()));
        ctx.out << (ctx.json ? "{\"imported\":" + std::to_string(advisories.size()) + "}"
                             : "imported " + std::to_string(advisories.size()) + " advisories")
                << '\n';
        return kExitOk;
    }
    auto store = IntelStore::open(ctx.cfg.store_dir);
    const auto n = export_osv(store, o.out_dir);
    log::info("stage=export written=" + std::to_string(n) + " dir=" + o.out_dir);
    ctx.out << (ctx.json ? "{\"written\":" + std::to_string(n) + "}"
                         : "wrote " + std::to_string(n) + " advisories to " + o.out_dir)
            << '\n';
    return kExitOk;
}

// ---- timeliness

int cmd_timeliness(Context& ctx, const std::vector<std::string>& feeds) {
    if (feeds.empty()) throw Error(ErrorKind::InvalidArgument, "timeliness needs at least one --feed");
    auto store = IntelStore::open(ctx.cfg.store_dir);
    std::vector<ExternalFeedEntry> entries;
    for (const auto& f : feeds) {
        auto part = read_feed_csv(f);
        entries.insert(entries.end(), part.begin(), part.end());
    }
    auto report = timeliness_report(store, entries);
    if (ctx.json) ctx.out << to_json(report).dump() << '\n';
    else ctx.out << render_timeliness(report);
    return kExitOk;
}

// ---- scan-mirror

struct ScanOpts {
    std::string csv_file;
};

int cmd_scan(Context& ctx, const ScanOpts& o) {
    auto store = IntelStore::open(ctx.cfg.store_dir);
    auto mirrors = load_mirror_list(ctx.cfg.mirrors_file.string());
    auto report = scan_mirrors(store, mirrors, ctx.cfg.policy, ctx.http(), ctx.clock(), ctx.limiter());
    if (!o.csv_file.empty()) write_file_atomic(o.csv_file, report_csv(report));
    for (const auto& [label, s] : report.summary)
        log::info("stage=scan-mirror mirror=" + label + " present=" + std::to_string(s.present) +
                  " absent=" + std::to_string(s.absent) + " unknown=" + std::to_string(s.unknown));
    if (ctx.json) ctx.out << to_json(report).dump() << '\n';
    else ctx.out << render_mirror_table(report);
    return kExitOk;
}

// ---- query

struct QueryOpts {
    std::string ecosystem, name, date_range, source_id;
};

int cmd_query(Context& ctx, const QueryOpts& o) {
    auto store = IntelStore::open(ctx.cfg.store_dir);
    QueryFilter f;
    if (!o.ecosystem.empty()) {
        try {
            f.ecosystem = parse_ecosystem(o.ecosystem);
        } catch (const Error& e) {
            throw Error(ErrorKind::InvalidArgument, std::string("--ecosystem: ") + e.what());
        }
    }
    if (!o.name.empty()) f.name = o.name;
    if (!o.date_range.empty()) f.date_range = parse_date_range(o.date_range);
    if (!o.source_id.empty()) f.source_id = o.source_id;
    for (const auto& a : store.query(f)) ctx.out << to_jsonl_line(a);
    return kExitOk;
}

// ---- serve

struct ServeOpts {
    std::string host = "127.0.0.1";
    int port = 8080;
};

int cmd_serve(Context& ctx, const ServeOpts& o) {
    auto store = std::make_shared<const IntelStore>(IntelStore::open(ctx.cfg.store_dir));
    ApiServer server(store);
    int port = o.port;
    if (port == 0) {
        port = server.bind_any(o.host);
        if (port < 0) throw Error(ErrorKind::Io, "cannot bind " + o.host);
        ctx.out << "serving " << store->size() << " packages on http://" << o.host << ':' << port << '\n'
                << std::flush;
        return server.listen_after_bind() ? kExitOk : kExitFailure;
    }
    ctx.out << "serving " << store->size() << " packages on http://" << o.host << ':' << port << '\n' << std::flush;
    if (!server.listen(o.host, port)) throw Error(ErrorKind::Io, "cannot listen on " + o.host + ":" + std::to_string(port));
    return kExitOk;
}

// ---- run-all

int cmd_run_all(Context& ctx, const std::string& out_dir) {
    int rc = cmd_crawl(ctx, {});
    if (rc != kExitOk) return rc;
    rc = cmd_extract(ctx, {});
    if (rc != kExitOk) return rc;
    rc = cmd_aggregate(ctx, {});
    if (rc != kExitOk) return rc;
    ExportOpts e;
    if (!out_dir.empty()) e.out_dir = out_dir;
    return cmd_export(ctx, e);
}

class SinkGuard {
public:
    SinkGuard(std::ostream* err) : active_(err != nullptr) {
        if (active_)
            log::set_sink([err](log::Level, std::string_view m) { *err << "[pkgintel] " << m << '\n'; });
    }
    ~SinkGuard() {
        if (active_) log::set_sink(nullptr);
    }

private:
    bool active_;
};

}  // namespace

int run_subcommand(const std::vector<std::string>& args, const CliServices& services) {
    std::ostream& out = services.out ? *services.out : std::cout;
    std::ostream& err = services.err ? *services.err : std::cerr;
    SinkGuard sink(services.err);
    const auto saved_level = log::level();

    CLI::App app{"Malicious package intelligence collection and lookup", "pkgintel"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    Flags flags;
    app.add_option("--config", flags.config_file, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--store", flags.store_dir, "store directory");
    app.add_option("--cache", flags.cache_dir, "page cache directory");
    app.add_option("--sources", flags.sources_file, "source descriptors (JSON Lines)");
    app.add_option("--dictionary", flags.dictionary, "English word list");
    app.add_option("--prompts", flags.prompts_dir, "stage prompt directory");
    app.add_option("--mirrors", flags.mirrors_file, "mirror list (JSON)");
    app.add_option("--metrics-log", flags.metrics_log, "token usage log (JSON Lines)");
    app.add_option("--backend", flags.backend, "analyzer backend")->check(CLI::IsMember({"deterministic", "remote"}));
    app.add_option("--min-common", flags.min_common, "common keywords required for relevance");
    app.add_option("--rate", flags.rate, "requests per second per host");
    app.add_option("--parallelism", flags.parallelism, "worker budget for every stage");
    app.add_flag("--offline", flags.offline, "serve only from the cache; no network access");
    app.add_flag("--json", flags.json, "JSON Lines output");
    app.add_flag("--print-config", flags.print_config, "print the effective configuration and exit");
    app.add_option("--log-level", flags.log_level, "debug, info, warn, error or off");

    auto* discover = app.add_subcommand("discover", "find candidate sources and review them");
    DiscoverOpts dopt;
    discover->add_option("--names", dopt.names_file, "package names, one per line");
    discover->add_option("--canned", dopt.canned_file, "canned search results (JSON)");
    discover->add_option("--threshold", dopt.threshold, "minimum domain hits (exclusive)");
    discover->add_option("--limit", dopt.limit, "results per query");
    discover->add_flag("--snowball", dopt.snowball, "also count outbound links of cached pages");
    discover->add_option("--tfidf", dopt.tfidf, "print the top K TF-IDF terms per cached page");
    discover->add_option("--approve", dopt.approve, "approve a source id");
    discover->add_option("--reject", dopt.reject, "reject a source id");
    discover->add_option("--tags", dopt.tags, "collection tags for --approve")->delimiter(',');
    discover->add_option("--seed", dopt.seeds, "index page URLs for --approve");

    auto* crawl = app.add_subcommand("crawl", "fetch collection pages of approved sources");
    CrawlOpts copt;
    crawl->add_option("--import-file", copt.import_file, "store a pre-rendered page instead of crawling")
        ->check(CLI::ExistingFile);
    crawl->add_option("--url", copt.url, "URL for --import-file");
    crawl->add_option("--source", copt.source_id, "source id for --import-file");
    crawl->add_flag("--refetch", copt.refetch, "fetch pages that are already cached");

    auto* filter = app.add_subcommand("filter", "score cached pages for relevance");

    auto* extract = app.add_subcommand("extract", "extract records from relevant cached pages");
    ExtractOpts eopt;
    extract->add_option("--report", eopt.report_file, "write per-page outcomes (JSON Lines)");

    auto* aggregate = app.add_subcommand("aggregate", "vote records into the snapshot");
    std::string agg_out;
    aggregate->add_option("--out", agg_out, "also write aggregates as JSON Lines");

    auto* exp = app.add_subcommand("export", "write or import OSV advisories");
    ExportOpts xopt;
    exp->add_option("--out", xopt.out_dir, "advisory directory");
    exp->add_option("--import", xopt.import_dir, "merge advisories from a directory")->check(CLI::ExistingDirectory);

    auto* timeliness = app.add_subcommand("timeliness", "compare discovery dates with external feeds");
    std::vector<std::string> feeds;
    timeliness->add_option("--feed", feeds, "feed CSV (repeatable)")->check(CLI::ExistingFile);

    auto* scan = app.add_subcommand("scan-mirror", "check registry mirrors for stored packages");
    ScanOpts sopt;
    scan->add_option("--csv", sopt.csv_file, "write the report as CSV");

    auto* query = app.add_subcommand("query", "look up aggregated intelligence");
    QueryOpts qopt;
    query->add_option("--ecosystem", qopt.ecosystem, "PyPI or NPM");
    query->add_option("--name", qopt.name, "package name");
    query->add_option("--date-range", qopt.date_range, "FROM..TO on the discovery date");
    query->add_option("--source", qopt.source_id, "source id");

    auto* serve = app.add_subcommand("serve", "read-only HTTP API");
    ServeOpts vopt;
    serve->add_option("--host", vopt.host, "bind address");
    serve->add_option("--port", vopt.port, "port (0 picks a free one)");

    auto* run_all = app.add_subcommand("run-all", "crawl, extract, aggregate and export");
    std::string run_out;
    run_all->add_option("--out", run_out, "advisory directory");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    int rc = kExitOk;
    try {
        log::set_level(parse_level(flags.log_level));
        const auto env = services.env ? *services.env : current_environment();
        PipelineConfig cfg = effective_config(flags, env);
        cfg.validate();
        if (flags.print_config) {
            out << to_json(cfg).dump(2) << '\n';
            log::set_level(saved_level);
            return kExitOk;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            log::set_level(saved_level);
            return kExitUsage;
        }
        Context ctx(cfg, services, flags.json);
        if (discover->parsed()) rc = cmd_discover(ctx, dopt);
        else if (crawl->parsed()) rc = cmd_crawl(ctx, copt);
        else if (filter->parsed()) rc = cmd_filter(ctx);
        else if (extract->parsed()) rc = cmd_extract(ctx, eopt);
        else if (aggregate->parsed()) rc = cmd_aggregate(ctx, agg_out);
        else if (exp->parsed()) rc = cmd_export(ctx, xopt);
        else if (timeliness->parsed()) rc = cmd_timeliness(ctx, feeds);
        else if (scan->parsed()) rc = cmd_scan(ctx, sopt);
        else if (query->parsed()) rc = cmd_query(ctx, qopt);
        else if (serve->parsed()) rc = cmd_serve(ctx, vopt);
        else if (run_all->parsed()) rc = cmd_run_all(ctx, run_out);
    } catch (const Error& e) {
        err << "pkgintel: " << e.what() << '\n';
        rc = e.kind() == ErrorKind::InvalidArgument ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        err << "pkgintel: " << e.what() << '\n';
        rc = kExitFailure;
    }
    log::set_level(saved_level);
    return rc;
}

int run_subcommand(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_subcommand(args, CliServices{});
}

}  // namespace pkgintel
