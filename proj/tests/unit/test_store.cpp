#include <doctest.h>

#include "pkgintel/aggregator.hpp"
#include "pkgintel/error.hpp"
#include "pkgintel/store.hpp"
#include "support/fixture_pipeline.hpp"

using namespace pkgintel;

namespace {

IntelRecord rec(std::string name, std::string source, std::int64_t t) {
    IntelRecord r;
    r.name = std::move(name);
    r.source_id = std::move(source);
    r.page_url = "https://" + r.source_id + ".example/" + r.name;
    r.collected_at = Timestamp{t};
    return r;
}

std::filesystem::path tablev(const char* f) { return fixture::dir() / "tablev" / f; }

IntelStore tablev_store() {
    IntelStore s;
    s.ingest(read_records_jsonl(tablev("records.jsonl").string()));
    return s;
}

}  // namespace

TEST_CASE("vote: majority, NaN ignored, tie to the latest, then the smallest") {
    using B = Ballot<std::string>;
    CHECK(vote_field<std::string>({}).winner == std::nullopt);
    CHECK(vote_field(std::vector<B>{{std::nullopt, Timestamp{1}}}).winner == std::nullopt);
    CHECK(*vote_field(std::vector<B>{{"a", Timestamp{1}}, {"b", Timestamp{9}}, {"a", Timestamp{2}}}).winner == "a");
    auto tie = vote_field(std::vector<B>{{"a", Timestamp{1}}, {"b", Timestamp{5}}, {std::nullopt, Timestamp{9}}});
    CHECK(*tie.winner == "b");
    CHECK(tie.tie_broken_by_timestamp);
    CHECK(*vote_field(std::vector<B>{{"b", Timestamp{5}}, {"a", Timestamp{5}}}).winner == "a");
    // a value's latest ballot is what counts in a tie
    CHECK(*vote_field(std::vector<B>{{"a", Timestamp{1}}, {"a", Timestamp{8}}, {"b", Timestamp{7}}, {"b", Timestamp{2}}})
               .winner == "a");
}

TEST_CASE("aggregate a group: min discovery date, IOC union, confirmations") {
    auto a = rec("Evil_Pkg", "s1", 100);
    a.versions = VersionSet{"1.0"};
    a.discovery_date = FlexDate{2023, 5, 4};
    a.iocs = {"1.2.3.4"};
    a.attack_method = "typosquatting";
    auto b = rec("evil-pkg", "s2", 200);
    b.versions = VersionSet{"1.1"};
    b.discovery_date = FlexDate{2023, 5, 10};
    b.iocs = {"evil.example"};
    auto c = rec("evil.pkg", "s2", 300);
    c.versions = VersionSet{"1.1"};

    auto agg = aggregate_group({a, b, c});
    CHECK(agg.name == "evil-pkg");
    CHECK(*agg.versions == VersionSet{"1.1"});
    CHECK(agg.discovery_date == FlexDate{2023, 5, 4});
    CHECK(agg.iocs == std::set<std::string>{"1.2.3.4", "evil.example"});
    CHECK(*agg.attack_method == "typosquatting");
    CHECK_FALSE(agg.discoverer);
    CHECK(agg.confirmation_count == 2);
    CHECK(agg.provenance.size() == 3);

    CHECK_THROWS_AS(aggregate_group({}), Error);
    auto other = rec("other", "s1", 1);
    CHECK_THROWS_AS(aggregate_group({a, other}), Error);
}

TEST_CASE("aggregate_all groups per ecosystem and is order independent") {
    auto p = rec("shared", "s1", 1);
    auto n = rec("shared", "s2", 2);
    n.ecosystem = Ecosystem::NPM;
    auto bad = rec("  ", "s3", 3);
    std::vector<GroupError> errors;
    auto out = aggregate_all({n, bad, p}, &errors);
    REQUIRE(out.size() == 2);
    CHECK(out[0].ecosystem == Ecosystem::PyPI);
    CHECK(out[1].ecosystem == Ecosystem::NPM);
    CHECK(errors.size() == 1);
    CHECK(aggregate_all({p, n}, nullptr, 4) == aggregate_all({n, p}));
}

TEST_CASE("projection carries voted fields and provenance") {
    auto a = rec("x", "s1", 100);
    auto b = rec("x", "s2", 300);
    b.attack_method = "dropper";
    auto agg = aggregate_group({a, b});
    auto one = project_to_record(agg);
    CHECK(one.source_id == "s2");
    CHECK(*one.attack_method == "dropper");
    auto all = project_to_records(agg);
    REQUIRE(all.size() == 2);
    CHECK(aggregate_group(all) == agg);
}

TEST_CASE("store ingest is idempotent and survives reopening") {
    auto dir = fixture::fresh_dir("store");
    auto r = rec("colorwed", "s1", 1700000000);
    r.discovery_date = FlexDate{2023, 1, 2};
    {
        auto s = IntelStore::open(dir);
        CHECK(s.ingest({r, r}) == 1);
        CHECK(s.ingest({r}) == 0);
        auto r2 = rec("colorwed", "s2", 1700000200);
        CHECK(s.ingest({r2}) == 1);
        s.save_snapshot();
    }
    auto s = IntelStore::open(dir);
    CHECK(s.size() == 1);
    CHECK(s.log().size() == 2);
    const auto* a = s.find(Ecosystem::PyPI, "ColorWed");
    REQUIRE(a);
    CHECK(a->confirmation_count == 2);
    auto m = s.meta();
    CHECK(m.record_count == 1);
    CHECK(m.source_count == 2);
    CHECK(m.log_records == 2);
    CHECK(m.created_at == Timestamp{1700000200});

    auto snap1 = read_file(dir / "snapshot.json");
    s.save_snapshot();
    CHECK(read_file(dir / "snapshot.json") == snap1);

    // snapshot alone is enough to reopen
    auto only = fixture::fresh_dir("store-snap");
    std::filesystem::copy_file(dir / "snapshot.json", only / "snapshot.json");
    CHECK(IntelStore::open(only).all() == s.all());
}

TEST_CASE("store queries") {
    auto s = tablev_store();
    CHECK(s.size() == 20);
    QueryFilter f;
    f.name = "pipsqlite3liberyV2";
    CHECK(s.query(f).size() == 1);
    f = {};
    f.date_range = parse_date_range("2022-12-01..2022-12-31");
    std::set<std::string> names;
    for (const auto& a : s.query(f)) names.insert(a.name);
    CHECK(names == std::set<std::string>{"logic2", "reqkests", "urllib12", "urllib7"});
    f = {};
    f.ecosystem = Ecosystem::NPM;
    CHECK(s.query(f).empty());
    f = {};
    f.source_id = "nope";
    CHECK(s.query(f).empty());
    CHECK_THROWS_AS(parse_date_range("2023-01-02..2023-01-01"), Error);
    CHECK_THROWS_AS(parse_date_range("2023-01-02"), Error);
    CHECK(parse_date_range("01/02/23..28/02/23").to == FlexDate{2023, 2, 28});
}

TEST_CASE("upsert merges by provenance") {
    IntelStore s;
    auto r = rec("pkg", "s1", 100);
    s.ingest({r});
    auto agg = *s.find(Ecosystem::PyPI, "pkg");
    s.upsert(agg);
    CHECK(s.log().size() == 1);
    agg.provenance.push_back({"s9", "https://s9.example/pkg", Timestamp{500}});
    agg.attack_method = "stealer";
    s.upsert(agg);
    CHECK(s.log().size() == 2);
    CHECK(s.find(Ecosystem::PyPI, "pkg")->confirmation_count == 2);
}

TEST_CASE("writer lock is exclusive") {
    auto dir = fixture::fresh_dir("lock");
    {
        StoreLock a(dir);
        try {
            StoreLock b(dir);
            FAIL("second lock acquired");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Lock);
        }
    }
    StoreLock again(dir);
    CHECK(std::filesystem::exists(dir / "store.lock"));
}

TEST_CASE("OSV advisory fields and round trip") {
    auto a = rec("@Scope/Evil", "s1", 1700000000);
    a.ecosystem = Ecosystem::NPM;
    a.name = normalize_name(a.name, a.ecosystem);
    a.versions = VersionSet{"1.0.0", "1.0.1"};
    a.discovery_date = FlexDate{2023, 9, 5};
    a.repo_url = "https://github.com/x/evil";
    a.iocs = {"abc123"};
    auto agg = aggregate_group({a});
    auto doc = to_osv(agg);
    CHECK(doc["id"] == advisory_id(agg));
    CHECK(advisory_id(agg).rfind("PKGINTEL-NPM-", 0) == 0);
    CHECK(advisory_id(agg).size() == std::string("PKGINTEL-NPM-").size() + 12);
    CHECK(doc["affected"][0]["package"]["ecosystem"] == "npm");
    CHECK(doc["affected"][0]["package"]["name"] == "@scope/evil");
    CHECK(doc["published"] == "2023-09-05T00:00:00Z");
    CHECK(doc["references"][0]["url"] == "https://github.com/x/evil");
    CHECK(from_osv(doc) == agg);

    auto undated = aggregate_group({rec("plain", "s1", 5)});
    auto d2 = to_osv(undated);
    CHECK_FALSE(d2.contains("published"));
    CHECK_FALSE(d2["affected"][0].contains("versions"));
    CHECK(from_osv(d2) == undated);

    CHECK(osv_text(agg).back() == '\n');
    CHECK_THROWS_AS(from_osv(Json::parse(R"({"id":"x"})")), Error);
}

TEST_CASE("OSV export and import over a directory") {
    auto s = tablev_store();
    auto out = fixture::fresh_dir("osv");
    CHECK(export_osv(s, out) == 20);
    CHECK(std::filesystem::exists(out / "PyPI"));
    auto back = import_osv(out);
    // files come back in path order, i.e. by advisory id
    std::sort(back.begin(), back.end(),
              [](const auto& a, const auto& b) { return std::tie(a.ecosystem, a.name) < std::tie(b.ecosystem, b.name); });
    CHECK(back == s.all());
    write_file_atomic(out / "PyPI" / "broken.json", "{");
    CHECK_THROWS_AS(import_osv(out), Error);
}

TEST_CASE("feed csv parsing") {
    auto f = parse_feed_csv("ecosystem,name,recorded_date,feed_label\nnpm,@a/b,2023-01-05,X\n");
    REQUIRE(f.size() == 1);
    CHECK(f[0].ecosystem == Ecosystem::NPM);
    CHECK(f[0].recorded_date == FlexDate{2023, 1, 5});
    CHECK_THROWS_AS(parse_feed_csv("name,date\na,b\n"), Error);
    CHECK_THROWS_AS(parse_feed_csv("ecosystem,name,recorded_date,feed_label\nPyPI,a,notadate,X\n"), Error);
}

TEST_CASE("timeliness offsets match the published comparison table") {
    // printed (+n) values, keyed by package and feed
    const std::map<std::pair<std::string, std::string>, std::int64_t> printed{
        {{"1inch", "Snyk"}, 3},           {{"libcontroltoolver", "OSV"}, 0},  {{"libcontroltoolver", "Snyk"}, 9},
        {{"matplotlyib", "Snyk"}, 31},    {{"pipcryptov4", "OSV"}, 266},      {{"pipcryptov4", "Snyk"}, 2},
        {{"libideeee", "OSV"}, 294},      {{"libideeee", "Snyk"}, 2},         {{"ethereum2", "Snyk"}, 436},
        {{"gkjzjh146", "OSV"}, 226},      {{"httprequesthub", "OSV"}, 186},   {{"httprequesthub", "Snyk"}, 3},
        {{"logic2", "Snyk"}, 104},        {{"flak7", "Snyk"}, 5},             {{"simpeljson", "OSV"}, 0},
        {{"simpeljson", "Snyk"}, 129},    {{"pyward", "Snyk"}, 1},            {{"studypong", "OSV"}, 1},
        {{"studypong", "Snyk"}, 11},      {{"reqkests", "Snyk"}, 2},          {{"beautiflulsoup", "Snyk"}, 1},
        // printed as +104, a misprint: 15/05/23 to 22/05/23 is a week
        {{"pipsqlite3liberyv2", "Snyk"}, 7},
    };
    auto s = tablev_store();
    auto feed = read_feed_csv(tablev("snyk.csv"));
    auto osv = read_feed_csv(tablev("osv.csv"));
    feed.insert(feed.end(), osv.begin(), osv.end());
    auto rep = timeliness_report(s, feed);
    CHECK(rep.rows.size() == printed.size());
    CHECK(rep.missing.empty());
    for (const auto& row : rep.rows) {
        auto it = printed.find({row.name, row.feed_label});
        REQUIRE_MESSAGE(it != printed.end(), row.name);
        CHECK_MESSAGE(row.gap == it->second, row.name << " " << row.feed_label);
    }
    CHECK(rep.earlier == printed.size() - 2);
    CHECK(rep.same == 2);
    CHECK(rep.later == 0);
    CHECK(rep.histogram.at(">365") == 1);
    CHECK(render_timeliness(rep).find("(+436)") != std::string::npos);

    feed.push_back({Ecosystem::PyPI, "unknownpkg", FlexDate{2023, 1, 1}, "X"});
    CHECK(timeliness_report(s, feed).missing.size() == 1);
}

TEST_CASE("gap buckets") {
    CHECK(gap_bucket(-3) == "<0");
    CHECK(gap_bucket(0) == "0");
    CHECK(gap_bucket(7) == "1-7");
    CHECK(gap_bucket(8) == "8-30");
    CHECK(gap_bucket(366) == ">365");
}
