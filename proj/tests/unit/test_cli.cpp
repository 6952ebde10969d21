#include <doctest.h>

#include <sstream>

#include "pkgintel/cli.hpp"
#include "support/fixture_pipeline.hpp"

using namespace pkgintel;

namespace {

struct Cli {
    std::filesystem::path root;
    std::ostringstream out, err;
    std::map<std::string, std::string> env;
    ManualClock clock{Timestamp{fixture::kCrawlStart}};
    HttpClient* http = nullptr;

    explicit Cli(const std::string& name) : root(fixture::fresh_dir(name)) {}

    int operator()(std::vector<std::string> args) {
        out.str("");
        err.str("");
        std::vector<std::string> full{"--store", (root / "store").string(), "--cache", (root / "cache").string(),
                                      "--sources", fixture::sources_file().string()};
        full.insert(full.end(), args.begin(), args.end());
        return run_subcommand(full, CliServices{http, &clock, &out, &err, &env});
    }
    std::filesystem::path store() const { return root / "store"; }
};

std::size_t line_count(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) return 0;
    auto s = read_file(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

void seed_store(const std::filesystem::path& store, const std::filesystem::path& records) {
    std::filesystem::create_directories(store);
    std::filesystem::copy_file(records, store / "records.jsonl", std::filesystem::copy_options::overwrite_existing);
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    Cli cli("cli-usage");
    CHECK(run_subcommand(std::vector<std::string>{}, CliServices{nullptr, &cli.clock, &cli.out, &cli.err, &cli.env}) ==
          kExitUsage);
    CHECK(cli({"frobnicate"}) == kExitUsage);
    CHECK(cli({"query", "--bogus"}) == kExitUsage);
    CHECK(cli({"--min-common", "lots", "filter"}) == kExitUsage);
    CHECK(cli({"--backend", "oracle", "filter"}) == kExitUsage);
    CHECK(cli({"query", "--ecosystem", "cargo"}) == kExitUsage);
    CHECK(cli({"--help"}) == kExitOk);
    CHECK(cli.out.str().find("scan-mirror") != std::string::npos);
}

TEST_CASE("effective configuration dump reflects flags over environment") {
    Cli cli("cli-config");
    cli.env = {{"PKGINTEL_MIN_COMMON", "5"}, {"PKGINTEL_RATE", "3"}};
    REQUIRE(cli({"--min-common", "4", "--print-config", "query"}) == kExitOk);
    auto j = Json::parse(cli.out.str());
    CHECK(j["min_common"] == 4);
    CHECK(j["policy"]["max_requests_per_second"] == 3.0);
    CHECK(j["store_dir"] == cli.store().string());
}

TEST_CASE("offline extract grows the log by the golden record count without network") {
    Cli cli("cli-extract");
    fixture::crawl_site(cli.root / "cache");
    ScriptedHttpClient never;
    RecordingHttpClient rec(never);
    cli.http = &rec;
    const auto golden = line_count(fixture::dir() / "pipeline" / "golden_records.jsonl");
    REQUIRE(golden == 21);
    REQUIRE(cli({"extract", "--offline", "--backend", "deterministic", "--parallelism", "2"}) == kExitOk);
    CHECK(line_count(cli.store() / "records.jsonl") == golden);
    CHECK(rec.requests().empty());
    // a second pass finds nothing new
    REQUIRE(cli({"extract", "--offline"}) == kExitOk);
    CHECK(line_count(cli.store() / "records.jsonl") == golden);
    CHECK(read_file(cli.store() / "records.jsonl") == read_file(fixture::dir() / "pipeline" / "golden_records.jsonl"));
}

TEST_CASE("remote backend is refused offline") {
    Cli cli("cli-remote");
    fixture::crawl_site(cli.root / "cache");
    // conflicting flags count as a usage error
    CHECK(cli({"extract", "--offline", "--backend", "remote"}) == kExitUsage);
    CHECK(cli.err.str().find("offline") != std::string::npos);
}

TEST_CASE("crawl through the injected client") {
    Cli cli("cli-crawl");
    DirectoryHttpClient site(fixture::site_root());
    cli.http = &site;
    REQUIRE(cli({"crawl"}) == kExitOk);
    CHECK(PageCache(cli.root / "cache").entries().size() == 16);
    CHECK(cli({"--offline", "crawl", "--refetch"}) == kExitFailure);
}

TEST_CASE("filter reports relevance per cached page") {
    Cli cli("cli-filter");
    fixture::crawl_site(cli.root / "cache");
    REQUIRE(cli({"filter", "--json"}) == kExitOk);
    bool saw_dropped = false;
    std::istringstream lines(cli.out.str());
    for (std::string line; std::getline(lines, line);) {
        auto j = Json::parse(line);
        if (j["url"] == "https://devhub.example/forum/thread-102.html") saw_dropped = j["relevance"]["relevant"] == false;
    }
    CHECK(saw_dropped);
}

TEST_CASE("query prints one JSON record per match") {
    Cli cli("cli-query");
    IntelRecord r;
    r.name = "colorwed";
    r.source_id = "s";
    r.page_url = "https://s.example/colorwed";
    r.collected_at = Timestamp{1700000000};
    std::filesystem::create_directories(cli.store());
    append_records_jsonl((cli.store() / "records.jsonl").string(), {r});
    REQUIRE(cli({"query", "--name", "colorwed"}) == kExitOk);
    auto out = cli.out.str();
    CHECK(std::count(out.begin(), out.end(), '\n') == 1);
    CHECK(Json::parse(out)["name"] == "colorwed");
    REQUIRE(cli({"query", "--name", "nothing-here"}) == kExitOk);
    CHECK(cli.out.str().empty());
}

TEST_CASE("timeliness reprints the day offsets") {
    Cli cli("cli-time");
    seed_store(cli.store(), fixture::dir() / "tablev" / "records.jsonl");
    REQUIRE(cli({"timeliness", "--feed", (fixture::dir() / "tablev" / "snyk.csv").string()}) == kExitOk);
    auto out = cli.out.str();
    for (auto gap : {"(+3)", "(+9)", "(+31)", "(+436)", "(+104)", "(+129)", "(+11)"})
        CHECK_MESSAGE(out.find(gap) != std::string::npos, gap);
    CHECK(cli({"timeliness"}) == kExitUsage);
    CHECK(cli({"timeliness", "--feed", "/nonexistent.csv"}) != kExitOk);
}

TEST_CASE("aggregate is re-runnable and export round-trips") {
    Cli cli("cli-agg");
    seed_store(cli.store(), fixture::dir() / "pipeline" / "golden_records.jsonl");
    auto jsonl = (cli.root / "aggs.jsonl").string();
    REQUIRE(cli({"aggregate", "--out", jsonl}) == kExitOk);
    auto snap = read_file(cli.store() / "snapshot.json");
    CHECK(read_file(jsonl) == read_file(fixture::golden_file()));
    REQUIRE(cli({"aggregate", "--out", jsonl}) == kExitOk);
    CHECK(read_file(cli.store() / "snapshot.json") == snap);

    auto osv = (cli.root / "osv").string();
    REQUIRE(cli({"export", "--out", osv}) == kExitOk);
    CHECK(std::filesystem::exists(cli.root / "osv" / "npm"));

    Cli other("cli-import");
    REQUIRE(other({"export", "--import", osv}) == kExitOk);
    REQUIRE(other({"aggregate", "--out", (other.root / "aggs.jsonl").string()}) == kExitOk);
    CHECK(read_file(other.root / "aggs.jsonl") == read_file(jsonl));
}

TEST_CASE("writer commands refuse a locked store") {
    Cli cli("cli-lock");
    seed_store(cli.store(), fixture::dir() / "tablev" / "records.jsonl");
    StoreLock held(cli.store());
    CHECK(cli({"aggregate"}) == kExitFailure);
    CHECK(cli.err.str().find("locked") != std::string::npos);
    // readers are not blocked
    CHECK(cli({"query", "--name", "logic2"}) == kExitOk);
}

TEST_CASE("scan-mirror writes a CSV report") {
    Cli cli("cli-mirror");
    seed_store(cli.store(), fixture::dir() / "tablev" / "records.jsonl");
    auto mirrors = cli.root / "mirrors.json";
    write_file_atomic(mirrors, R"([{"label":"m","ecosystem":"PyPI","base_url":"https://m.example","probe_style":"pypi_simple"}])");
    ScriptedHttpClient http;
    http.add("https://m.example/simple/logic2/", 200, R"(<a href="logic2-0.1.4.tar.gz">logic2-0.1.4.tar.gz</a>)");
    cli.http = &http;
    auto csv = cli.root / "scan.csv";
    REQUIRE(cli({"--mirrors", mirrors.string(), "scan-mirror", "--csv", csv.string()}) == kExitOk);
    auto text = read_file(csv);
    CHECK(line_count(csv) == 21);
    CHECK(text.find("logic2,0.1.4,m,yes,200,") != std::string::npos);
}
