#include <doctest.h>

#include <atomic>
#include <cmath>

#include "pkgintel/discovery.hpp"
#include "pkgintel/error.hpp"
#include "support/fixture_pipeline.hpp"

using namespace pkgintel;

namespace {

PageDocument page(std::string url, std::string source, std::string text, std::int64_t published = 0) {
    PageDocument d;
    d.url = std::move(url);
    d.source_id = std::move(source);
    d.blocks.push_back({BlockKind::Paragraph, std::move(text), std::nullopt});
    if (published) d.published_at = Timestamp{published};
    return d;
}

std::string numbered(int from, int to) {
    std::string s;
    for (int i = from; i <= to; ++i) s += "w" + std::to_string(i) + " ";
    return s;
}

class CountingSearch final : public SearchClient {
public:
    std::vector<std::string> search(const std::string& q, std::size_t) override {
        ++calls;
        if (q.find("boom") != std::string::npos) throw FetchError(ErrorKind::Transport, "boom", "search");
        return {"https://a.example/1", "https://a.example/1", "https://b.example/" + q};
    }
    std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("the published common keywords") {
    const auto& c = default_common_keywords();
    CHECK(c.size() == 17);
    CHECK(c.front() == "package");
    CHECK(c.back() == "workflow");
    auto ks = KeywordSet::defaults({"Colorwed"});
    CHECK(ks.special == std::set<std::string>{"colorwed", "npm", "pypi"});
    CHECK_THROWS_AS(KeywordSet::make({"package"}, {"package"}), Error);
    CHECK(KeywordSet::make({"  Package ", "package", ""}, {}).common == std::vector<std::string>{"package"});
}

TEST_CASE("queries quote the package name and append the common terms") {
    auto ks = KeywordSet::make({"malicious", "package"}, {"pypi"});
    auto q = build_queries({"colorwed", " 1inch "}, ks);
    REQUIRE(q.size() == 2);
    CHECK(q[0] == "\"colorwed\" malicious package");
    CHECK(q[1] == "\"1inch\" malicious package");
    CHECK_THROWS_AS(build_queries({}, ks), Error);
    CHECK_THROWS_AS(build_queries({"  "}, ks), Error);
}

TEST_CASE("harvesting dedupes, caps and isolates failures") {
    CountingSearch s;
    CHECK(harvest_results("x", s, 100) == std::vector<std::string>{"https://a.example/1", "https://b.example/x"});
    CHECK(harvest_results("x", s, 1).size() == 1);
    CHECK_THROWS_AS(harvest_results("x", s, 0), Error);

    auto outs = harvest_all({"q1", "boom", "q3", "q4", "q5"}, s, 100, 2);
    REQUIRE(outs.size() == 5);
    CHECK(outs[0].query == "q1");
    CHECK(outs[1].error.has_value());
    CHECK(outs[4].urls.back() == "https://b.example/q5");
}

TEST_CASE("canned search fixture format") {
    auto dir = fixture::fresh_dir("canned");
    write_file_atomic(dir / "c.json", R"({"\"x\" a": ["https://s.example/1", "https://t.example/2"]})");
    auto c = CannedSearchClient::from_file((dir / "c.json").string());
    CHECK(c.search("\"x\" a", 10).size() == 2);
    CHECK(c.search("other", 10).empty());
}

TEST_CASE("domains must appear strictly more than the threshold") {
    std::vector<std::string> urls;
    for (int i = 0; i < 11; ++i) urls.push_back("https://www.snyk.io/vuln/" + std::to_string(i));
    for (int i = 0; i < 10; ++i) urls.push_back("https://blog.example.com/" + std::to_string(i));
    urls.push_back("notaurl");
    urls.push_back("ftp://x.example/");
    auto t = tally_and_filter_domains(urls, 10);
    CHECK(t.counts == std::map<std::string, std::size_t>{{"snyk.io", 11}});
    CHECK(t.skipped == 2);
    CHECK(tally_and_filter_domains(urls, 9).counts.size() == 2);
}

TEST_CASE("outbound links come from the article body only") {
    PageDocument d;
    d.url = "https://blog.example.com/post";
    d.raw_markup = R"(<nav><a href="https://nav.example/">n</a></nav><article><p>See <a href="/rel">r</a>,
        <a href="https://snyk.io/x">s</a>, <a href="https://snyk.io/x">dup</a> and <a href="mailto:a@b">m</a>.</p></article>)";
    auto links = extract_outbound_links(d);
    CHECK(links == std::vector<std::string>{"https://blog.example.com/rel", "https://snyk.io/x"});
}

TEST_CASE("shingle similarity") {
    auto a = page("https://a.example/1", "a", numbered(1, 10));
    auto b = page("https://b.example/1", "b", numbered(1, 12));
    auto c = page("https://c.example/1", "c", numbered(50, 60));
    // 6 shared 5-word windows out of 8 distinct.
    CHECK(detect_reprint(a, b) == doctest::Approx(0.75));
    CHECK(detect_reprint(a, a) == doctest::Approx(1.0));
    CHECK(detect_reprint(a, c) == doctest::Approx(0.0));
    CHECK(detect_reprint(a, page("https://e.example/", "e", "")) == 0.0);
    CHECK(shingles({"x", "y"}).size() == 1);
}

TEST_CASE("the later page of a near-duplicate pair is the reprint") {
    const auto text = numbered(1, 40);
    auto orig = page("https://orig.example/p", "orig", text, 1000);
    auto copy = page("https://copy.example/p", "copy", text + " via orig", 2000);
    auto same_source = page("https://orig.example/q", "orig", text, 500);
    auto f = find_reprints({copy, orig, same_source}, 0.8);
    REQUIRE(f.size() == 2);
    for (const auto& x : f) {
        CHECK(x.reprint_url == "https://copy.example/p");
        CHECK(x.reprint_source_id == "copy");
        CHECK(x.similarity >= 0.8);
    }
    std::vector<SourceDescriptor> sources(2);
    sources[0].source_id = "orig";
    sources[1].source_id = "copy";
    mark_reprints(sources, f);
    CHECK(sources[0].status == SourceStatus::Candidate);
    CHECK(sources[1].status == SourceStatus::Reprint);
}

TEST_CASE("tf-idf ranks rare terms first") {
    // idf(rare) = ln(4/2) + 1, idf(package) = ln(4/4) + 1 = 1
    auto top = tfidf_keywords({"remoteshell remoteshell package", "package security", "package ransomware"}, 2);
    CHECK(top[0] == std::vector<std::string>{"remoteshell", "package"});
    CHECK(top[1] == std::vector<std::string>{"security", "package"});
    CHECK(top[2] == std::vector<std::string>{"ransomware", "package"});
    CHECK(tfidf_keywords({"the and of 2023"}, 5)[0].empty());
    CHECK_THROWS_AS(tfidf_keywords({}, 3), Error);
}

TEST_CASE("review queue and reviewer actions") {
    DomainTally t;
    t.counts = {{"blog.phylum.io", 12}, {"stackoverflow.com", 15}};
    auto q = build_review_queue(t, KeywordSet::defaults());
    REQUIRE(q.size() == 2);
    CHECK(q[0].status == SourceStatus::Candidate);
    CHECK(q[1].category == SourceCategory::DeveloperCommunity);
    CHECK_THROWS_AS(review_source(q, "blog.phylum.io", SourceStatus::Approved), Error);
    review_source(q, "blog.phylum.io", SourceStatus::Approved, {"malicious-packages"});
    CHECK(q[0].status == SourceStatus::Approved);
    review_source(q, "stackoverflow.com", SourceStatus::Rejected);
    CHECK(q[1].status == SourceStatus::Rejected);
    CHECK_THROWS_AS(review_source(q, "nope", SourceStatus::Rejected), Error);
}

TEST_CASE("source descriptors round-trip through json lines") {
    auto sources = read_sources_jsonl(fixture::sources_file().string());
    REQUIRE(sources.size() == 4);
    CHECK(sources[0].status == SourceStatus::Approved);
    CHECK(sources[0].seed_urls.size() == 1);
    auto dir = fixture::fresh_dir("sources");
    write_sources_jsonl((dir / "s.jsonl").string(), sources);
    CHECK(read_sources_jsonl((dir / "s.jsonl").string()) == sources);
    SourceDescriptor bad;
    bad.source_id = "x";
    bad.domain = "https://x.example/";
    CHECK_THROWS_AS(validate(bad), Error);
}
