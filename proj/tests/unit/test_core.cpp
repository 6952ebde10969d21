#include <doctest.h>

#include "pkgintel/core.hpp"
#include "pkgintel/error.hpp"

using namespace pkgintel;

namespace {

// Reference day counter: walks the calendar one day at a time.
int month_length(int y, int m) {
    static const int len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
    return len[m - 1];
}

long naive_gap(FlexDate a, FlexDate b) {
    long sign = 1;
    if (b < a) {
        std::swap(a, b);
        sign = -1;
    }
    long n = 0;
    while (a < b) {
        if (++a.day > month_length(a.year, a.month)) {
            a.day = 1;
            if (++a.month > 12) {
                a.month = 1;
                ++a.year;
            }
        }
        ++n;
    }
    return sign * n;
}

}  // namespace

TEST_CASE("flexible dates are day-first with two-digit years in 2000s") {
    CHECK(parse_flexible_date("07/10/22") == FlexDate{2022, 10, 7});
    CHECK(parse_flexible_date("26/02/2023") == FlexDate{2023, 2, 26});
    CHECK(parse_flexible_date("2023-12-22") == FlexDate{2023, 12, 22});
    CHECK(parse_flexible_date("September 26, 2022") == FlexDate{2022, 9, 26});
    CHECK(parse_flexible_date("5 May 2023") == FlexDate{2023, 5, 5});
    CHECK_THROWS_AS(parse_flexible_date("31/02/2023"), Error);
    CHECK_THROWS_AS(parse_flexible_date("13/13/13"), Error);
    CHECK_FALSE(try_parse_flexible_date("yesterday").has_value());
    CHECK(FlexDate{2022, 10, 7}.to_short() == "07/10/22");
    CHECK(FlexDate{2022, 10, 7}.to_iso() == "2022-10-07");
}

TEST_CASE("days_between agrees with a day-by-day walk") {
    CHECK(days_between({2022, 10, 7}, {2023, 12, 17}) == 436);
    CHECK(days_between({2023, 2, 26}, {2023, 2, 26}) == 0);
    CHECK(days_between({2023, 3, 1}, {2023, 2, 28}) == -1);
    const FlexDate anchors[] = {{1999, 12, 31}, {2000, 2, 28}, {2020, 2, 29}, {2022, 9, 30}, {2023, 12, 31}, {2024, 3, 1}};
    for (const auto& a : anchors)
        for (int y = 1999; y <= 2025; y += 2)
            for (int m = 1; m <= 12; ++m) {
                FlexDate b{y, m, std::min(28, 1 + (y * m) % 31)};
                CHECK(days_between(a, b) == naive_gap(a, b));
            }
}

TEST_CASE("epoch day conversion round-trips") {
    for (std::int64_t d = -800; d < 25000; d += 37) CHECK(FlexDate::from_days(d).days_since_epoch() == d);
    CHECK(FlexDate{1970, 1, 1}.days_since_epoch() == 0);
}

TEST_CASE("timestamps print and parse ISO-8601 UTC") {
    auto t = Timestamp::parse_iso("2023-10-03T12:00:00Z");
    CHECK(t.to_iso() == "2023-10-03T12:00:00Z");
    CHECK(t.date() == FlexDate{2023, 10, 3});
    CHECK(Timestamp::from_date({2023, 10, 3}, 12).seconds == t.seconds);
    CHECK_THROWS_AS(Timestamp::parse_iso("not a time"), Error);
}

TEST_CASE("package names normalize per ecosystem") {
    CHECK(normalize_name("Requests_Toolbelt", Ecosystem::PyPI) == "requests-toolbelt");
    CHECK(normalize_name("zope..interface", Ecosystem::PyPI) == "zope-interface");
    CHECK(normalize_name("pipsqlite3liberyV2", Ecosystem::PyPI) == "pipsqlite3liberyv2");
    CHECK(normalize_name("@Scope/My_Pkg", Ecosystem::NPM) == "@scope/my_pkg");
    CHECK_THROWS_AS(normalize_name("   ", Ecosystem::PyPI), Error);
    CHECK(parse_ecosystem("npm") == Ecosystem::NPM);
    CHECK(parse_ecosystem("PyPI") == Ecosystem::PyPI);
    CHECK(osv_ecosystem_name(Ecosystem::NPM) == "npm");
}

TEST_CASE("records serialize with null for unknown fields and round-trip") {
    IntelRecord r;
    r.name = "colorwed";
    r.discovery_date = FlexDate{2023, 9, 26};
    r.versions = VersionSet{"0.1", "0.2"};
    r.iocs = {"evil.example"};
    r.collected_at = Timestamp::parse_iso("2023-10-01T00:00:00Z");
    r.source_id = "s";
    r.page_url = "https://s.example/a";
    const auto line = to_jsonl_line(r);
    CHECK(line.back() == '\n');
    CHECK(line.find("\"repo_url\":null") != std::string::npos);
    CHECK(line.find("notes") == std::string::npos);
    CHECK(record_from_json(Json::parse(line)) == r);

    IntelRecord unknown = r;
    unknown.versions.reset();
    CHECK(record_from_json(Json::parse(to_jsonl_line(unknown))).versions == std::nullopt);
    IntelRecord none = r;
    none.versions = VersionSet{};
    CHECK(record_from_json(Json::parse(to_jsonl_line(none))).versions == VersionSet{});
}

TEST_CASE("record validation rejects broken invariants") {
    IntelRecord r;
    r.name = "ok-name";
    r.collected_at = Timestamp::from_date({2023, 1, 1});
    CHECK_NOTHROW(validate(r));
    r.discovery_date = FlexDate{2023, 1, 2};
    CHECK_THROWS_AS(validate(r), Error);
    r.discovery_date.reset();
    r.name = "Not_Canonical";
    CHECK_THROWS_AS(validate(r), Error);
    r.name = "ok-name";
    r.iocs = {" "};
    CHECK_THROWS_AS(validate(r), Error);
}
