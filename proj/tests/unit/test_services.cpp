#include <doctest.h>

#include <thread>

#include "pkgintel/api.hpp"
#include "pkgintel/config.hpp"
#include "pkgintel/error.hpp"
#include "pkgintel/mirror.hpp"
#include "pkgintel/remote_backend.hpp"
#include "pkgintel/store.hpp"
#include "support/fixture_pipeline.hpp"

using namespace pkgintel;

namespace {

AggregatedIntel pkg(std::string name, Ecosystem eco = Ecosystem::PyPI) {
    IntelRecord r;
    r.ecosystem = eco;
    r.name = normalize_name(name, eco);
    r.source_id = "s";
    r.page_url = "https://s.example/" + r.name;
    r.collected_at = Timestamp{1700000000};
    r.versions = VersionSet{"1.0"};
    IntelStore s;
    s.ingest({r});
    return s.all().front();
}

const MirrorTarget kSimple{"simple", Ecosystem::PyPI, "https://mirror.example", ProbeStyle::PypiSimple};
const MirrorTarget kNpm{"npmjs", Ecosystem::NPM, "https://npm.example", ProbeStyle::NpmRegistry};

}  // namespace

TEST_CASE("simple-index file names yield versions") {
    auto v = versions_from_filenames({"Foo_Bar-1.0.tar.gz", "foo_bar-1.1-py3-none-any.whl", "foo.bar-2.0.zip",
                                      "foo-bar-baz-9.0.tar.gz", "foo_bar-3.0.egg", "README.txt"},
                                     "foo-bar");
    CHECK(v == VersionSet{"1.0", "1.1", "2.0", "3.0"});
    auto files = simple_index_files(
        R"(<html><body><a href="../../packages/x-1.0.tar.gz#sha256=aa">x-1.0.tar.gz</a><br><a href="x-1.1.whl">x-1.1.whl</a></body></html>)");
    CHECK(files == std::vector<std::string>{"x-1.0.tar.gz", "x-1.1.whl"});
    CHECK(simple_index_files("<html><body></body></html>").empty());
}

TEST_CASE("mirror probes: present, absent and unknown") {
    ScriptedHttpClient http;
    ManualClock clock;
    RateLimiter limiter(clock);
    CrawlPolicy p;
    p.retries = 1;
    http.add("https://mirror.example/simple/evil-pkg/", 200, R"(<a href="evil_pkg-0.2.tar.gz">evil_pkg-0.2.tar.gz</a>)");
    http.add("https://mirror.example/simple/gone/", 404, "");
    http.add("https://mirror.example/simple/empty/", 200, "<html></html>");
    http.add("https://mirror.example/simple/flaky/", 503, "");
    http.add_failure("https://mirror.example/simple/down/");
    http.add("https://mirror.example/simple/moved/", 301, "", {{"location", "/simple/evil-pkg/"}});

    auto probe = [&](const std::string& n) { return probe_package(kSimple, n, p, http, limiter, clock); };
    auto present = probe("Evil_Pkg");
    CHECK(present.presence == Presence::Present);
    CHECK(present.versions == VersionSet{"0.2"});
    CHECK(probe("gone").presence == Presence::Absent);
    CHECK(probe("empty").presence == Presence::Absent);
    auto flaky = probe("flaky");
    CHECK(flaky.presence == Presence::Unknown);
    CHECK(flaky.attempts == 2);
    CHECK(flaky.http_status == 503);
    auto down = probe("down");
    CHECK(down.presence == Presence::Unknown);
    CHECK(down.http_status == 0);
    CHECK(probe("moved").presence == Presence::Present);
}

TEST_CASE("npm registry probes encode scopes") {
    ScriptedHttpClient http;
    ManualClock clock;
    RateLimiter limiter(clock);
    CrawlPolicy p;
    http.add("https://npm.example/@evil%2fpkg", 200, R"({"name":"@evil/pkg","versions":{"1.0.0":{},"1.0.1":{}}})");
    http.add("https://npm.example/unpublished", 200, R"({"name":"unpublished","versions":{}})");
    http.add("https://npm.example/html", 200, "<html>captcha</html>");
    auto r = probe_package(kNpm, "@Evil/pkg", p, http, limiter, clock);
    CHECK(r.presence == Presence::Present);
    CHECK(r.versions == VersionSet{"1.0.0", "1.0.1"});
    CHECK(probe_package(kNpm, "unpublished", p, http, limiter, clock).presence == Presence::Absent);
    CHECK(probe_package(kNpm, "html", p, http, limiter, clock).presence == Presence::Unknown);
    CHECK(probe_package(kNpm, "never-seen", p, http, limiter, clock).presence == Presence::Absent);
}

TEST_CASE("scan report rows, summary and renderings") {
    ScriptedHttpClient http;
    ManualClock clock;
    RateLimiter limiter(clock);
    CrawlPolicy p;
    p.max_requests_per_second = 4;
    http.add("https://mirror.example/simple/aaa/", 200, R"(<a href="aaa-1.0.tar.gz">aaa-1.0.tar.gz</a>)");
    http.fail_host("down.example");
    std::vector<MirrorTarget> mirrors{kSimple, {"down", Ecosystem::PyPI, "https://down.example", ProbeStyle::PypiSimple},
                                      kNpm};
    auto rep = scan_mirrors({pkg("aaa"), pkg("bbb"), pkg("ccc", Ecosystem::NPM)}, mirrors, p, http, clock, limiter);
    CHECK(rep.rows.size() == 5);
    CHECK(rep.summary.at("simple") == MirrorSummary{1, 1, 0});
    CHECK(rep.summary.at("down") == MirrorSummary{0, 0, 2});
    CHECK(rep.summary.at("npmjs") == MirrorSummary{0, 1, 0});
    auto csv = report_csv(rep);
    CHECK(csv.rfind("package,versions,mirror,present,status,probed_at\n", 0) == 0);
    CHECK(csv.find("aaa,1.0,simple,yes,") != std::string::npos);
    CHECK(csv.find(",down,unknown,") != std::string::npos);
    auto table = render_mirror_table(rep);
    CHECK(table.find('?') != std::string::npos);
    for (const auto& [host, g] : limiter.grants())
        for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] - g[i - 1] >= MonoTime{std::chrono::milliseconds(250)});
}

TEST_CASE("mirror list validation") {
    auto m = mirrors_from_json(Json::parse(
        R"([{"label":"a","ecosystem":"PyPI","base_url":"https://a.example","probe_style":"pypi_simple"}])"));
    CHECK(m.size() == 1);
    CHECK(mirrors_from_json(Json::parse(to_json(m).dump())) == m);
    MirrorTarget bad = kSimple;
    bad.style = ProbeStyle::NpmRegistry;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = kSimple;
    bad.base_url = "ftp://x";
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("api endpoints") {
    IntelStore s;
    s.ingest(project_to_records(pkg("colorwed")));
    s.ingest(project_to_records(pkg("@scope/thing", Ecosystem::NPM)));
    auto get = [&](const std::string& path, std::map<std::string, std::string> q = {}) {
        return handle_api_request(s, "GET", path, q);
    };
    auto stats = Json::parse(get("/v1/stats").body);
    CHECK(stats["record_count"] == 2);
    CHECK(stats["by_ecosystem"]["NPM"] == 1);
    CHECK(Json::parse(get("/v1/packages", {{"ecosystem", "npm"}}).body).size() == 1);
    CHECK(Json::parse(get("/v1/packages/pypi/ColorWed").body)["name"] == "colorwed");
    CHECK(get("/v1/packages/npm/%40scope%2Fthing").status == 200);
    CHECK(get("/v1/packages/npm/@scope/thing").status == 200);
    CHECK(get("/v1/packages/pypi/missing").status == 404);
    CHECK(get("/v1/packages", {{"ecosystem", "cargo"}}).status == 400);
    CHECK(get("/v2").status == 404);
    CHECK(handle_api_request(s, "POST", "/v1/stats", {}).status == 405);
}

TEST_CASE("api server answers over loopback") {
    auto store = std::make_shared<IntelStore>();
    store->ingest(project_to_records(pkg("colorwed")));
    ApiServer server(store);
    int port = server.bind_any("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    NetworkHttpClient client;
    HttpResponse r;
    for (int i = 0; i < 50; ++i) {
        try {
            r = client.get("http://127.0.0.1:" + std::to_string(port) + "/v1/packages?name=colorwed", {}, Duration{2000});
            break;
        } catch (const FetchError&) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
    }
    server.stop();
    t.join();
    CHECK(r.status == 200);
    CHECK(Json::parse(r.body).size() == 1);
}

TEST_CASE("config precedence: defaults, file, environment") {
    PipelineConfig c;
    CHECK(c.min_common == 3);
    c = apply_config_json(c, Json::parse(R"({"min_common":5,"store_dir":"/tmp/s","policy":{"max_requests_per_second":2}})"));
    CHECK(c.min_common == 5);
    CHECK(c.store_dir == "/tmp/s");
    CHECK(c.policy.max_requests_per_second == 2);
    CHECK(c.cache_dir == PipelineConfig{}.cache_dir);
    c = apply_environment(c, {{"PKGINTEL_MIN_COMMON", "7"}, {"PKGINTEL_OFFLINE", "yes"}, {"PKGINTEL_BACKEND", "remote"}});
    CHECK(c.min_common == 7);
    CHECK(c.offline);
    CHECK(c.backend == BackendChoice::Remote);
    CHECK(c.store_dir == "/tmp/s");
    CHECK_THROWS_AS(apply_config_json(c, Json::parse(R"({"min_comon":5})")), Error);
    CHECK_THROWS_AS(apply_environment(c, {{"PKGINTEL_MIN_COMMON", "lots"}}), Error);
    auto round = apply_config_json(PipelineConfig{}, Json::parse(to_json(c).dump()));
    CHECK(to_json(round) == to_json(c));
}

TEST_CASE("config validation") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.reprint_threshold = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.extract_parallelism = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.dictionary = "/nonexistent/words.txt";
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.policy.max_requests_per_second = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("remote backend request and reply handling") {
    ScriptedHttpClient http;
    RecordingHttpClient rec(http);
    RemoteBackendConfig cfg;
    cfg.endpoint = "https://llm.example/v1/chat/completions";
    cfg.api_key = "k";
    RemoteBackend b(cfg, rec);
    http.add(cfg.endpoint, 200,
             R"({"choices":[{"message":{"content":"{\"package_name\":[]}"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}})");
    PageDocument doc;
    auto reply = b.extract("PROMPT", doc, {});
    CHECK(reply.text == R"({"package_name":[]})");
    CHECK(reply.prompt_tokens == 12);
    CHECK(reply.response_tokens == 3);
    auto reqs = rec.requests();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].method == "POST");
    CHECK(reqs[0].headers.at("authorization") == "Bearer k");
    auto body = Json::parse(reqs[0].body);
    CHECK(body["temperature"] == 0);
    CHECK(body["messages"][1]["content"] == "PROMPT");

    auto other = [&](const std::string& path, int status, std::string body) {
        RemoteBackendConfig c = cfg;
        c.endpoint = "https://llm.example/" + path;
        http.add(c.endpoint, status, std::move(body));
        return RemoteBackend(c, http);
    };
    try {
        other("throttled", 429, "").extract("P", doc, {});
        FAIL("expected throttle");
    } catch (const FetchError& e) {
        CHECK(e.kind() == ErrorKind::Throttle);
        CHECK(e.retryable());
    }
    CHECK_THROWS_AS(other("odd", 200, R"({"nothing":1})").extract("P", doc, {}), ExtractionError);
    try {
        other("denied", 401, "").extract("P", doc, {});
        FAIL("expected refusal");
    } catch (const FetchError& e) {
        CHECK(e.kind() == ErrorKind::PermanentFetch);
        CHECK_FALSE(e.retryable());
    }
    try {
        other("broken", 502, "").extract("P", doc, {});
        FAIL("expected transport error");
    } catch (const FetchError& e) {
        CHECK(e.kind() == ErrorKind::Transport);
    }
}
