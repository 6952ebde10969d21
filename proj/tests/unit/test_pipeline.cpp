#include <doctest.h>

#include "support/fixture_pipeline.hpp"

using namespace pkgintel;

namespace {

const PageOutcome* page(const ExtractionReport& r, const std::string& url) {
    for (const auto& p : r.pages)
        if (p.url == url) return &p;
    return nullptr;
}

}  // namespace

TEST_CASE("fixture corpus reproduces the golden aggregates") {
    auto cache = fixture::fresh_dir("golden");
    auto crawl = fixture::crawl_site(cache);
    REQUIRE(crawl.failures.empty());
    auto run = fixture::extract_and_aggregate(cache);
    CHECK(run.jsonl == read_file(fixture::golden_file()));

    const auto* irrelevant = page(run.report, "https://devhub.example/forum/thread-102.html");
    REQUIRE(irrelevant);
    CHECK_FALSE(irrelevant->relevance.relevant);
    CHECK(irrelevant->records == 0);

    const auto* copy = page(run.report, "https://threadly.example/posts/wheel-dropper-copy.html");
    REQUIRE(copy);
    REQUIRE(copy->reprint);
    CHECK(copy->reprint->similarity >= 0.8);
    CHECK(copy->records == 0);
    REQUIRE(run.report.reprints.size() == 1);

    for (const auto& p : run.report.pages) CHECK_MESSAGE(!p.error, p.url);
    CHECK(run.report.records.size() == 21);
}

TEST_CASE("parallel extraction gives the same output") {
    auto cache = fixture::fresh_dir("parallel");
    fixture::crawl_site(cache);
    auto one = fixture::extract_and_aggregate(cache, 1);
    auto four = fixture::extract_and_aggregate(cache, 4);
    CHECK(one.jsonl == four.jsonl);
    CHECK(one.report.records == four.report.records);
}

TEST_CASE("crawl skips cached pages unless asked to refetch") {
    auto cache_dir = fixture::fresh_dir("recrawl");
    fixture::crawl_site(cache_dir);
    DirectoryHttpClient site(fixture::site_root());
    RecordingHttpClient rec(site);
    ManualClock clock(Timestamp{fixture::kCrawlStart});
    RateLimiter limiter(clock);
    Fetcher fetcher(rec, limiter, clock);
    PageCache cache(cache_dir);
    auto sources = read_sources_jsonl(fixture::sources_file().string());
    auto again = crawl_sources(sources, cache, fetcher);
    CHECK(again.fetched == 0);
    CHECK(again.skipped_cached == 16);
    CHECK(rec.requests().empty());
    auto forced = crawl_sources(sources, cache, fetcher, true);
    CHECK(forced.fetched == 16);
}

TEST_CASE("failed fetches are reported per page") {
    auto cache_dir = fixture::fresh_dir("brokencrawl");
    ScriptedHttpClient http;
    http.fail_host("labs.example");
    DirectoryHttpClient site(fixture::site_root());
    // everything but labs comes from the site
    struct Split final : HttpClient {
        HttpClient& good;
        HttpClient& bad;
        Split(HttpClient& g, HttpClient& b) : good(g), bad(b) {}
        HttpResponse get(const std::string& u, const Headers& h, Duration t) override {
            return u.find("labs.example") != std::string::npos ? bad.get(u, h, t) : good.get(u, h, t);
        }
        HttpResponse post(const std::string& u, const std::string& b, const Headers& h, Duration t) override {
            return good.post(u, b, h, t);
        }
    } split(site, http);
    auto s = fixture::crawl_site(cache_dir, &split);
    CHECK(s.failures.size() == 1);
    CHECK(s.fetched == 12);
}

TEST_CASE("rejected sources are not extracted") {
    auto cache_dir = fixture::fresh_dir("rejected");
    fixture::crawl_site(cache_dir);
    auto sources = read_sources_jsonl(fixture::sources_file().string());
    for (auto& s : sources)
        if (s.domain == "devhub.example") s.status = SourceStatus::Rejected;
    PageCache cache(cache_dir);
    DeterministicBackend backend;
    auto rep = extract_cached_pages(cache, sources, KeywordSet::defaults(), Dictionary::load_default(), backend,
                                    PromptSet::load_default(), {});
    for (const auto& p : rep.pages)
        if (p.url.find("devhub.example") != std::string::npos) {
            CHECK(p.skipped_source);
            CHECK(p.records == 0);
        }
    for (const auto& r : rep.records) CHECK(r.page_url.find("devhub.example") == std::string::npos);
}
