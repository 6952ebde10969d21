#include <doctest.h>

#include <deque>
#include <random>

#include "pkgintel/candidates.hpp"
#include "pkgintel/deterministic_backend.hpp"
#include "pkgintel/error.hpp"
#include "pkgintel/ltm.hpp"
#include "pkgintel/relevance.hpp"

using namespace pkgintel;

namespace {

PageDocument doc_of(std::vector<Block> blocks, std::string url = "https://x.example/p") {
    PageDocument d;
    d.url = std::move(url);
    d.source_id = "x";
    d.fetched_at = Timestamp::parse_iso("2024-01-15T00:00:00Z");
    d.blocks = std::move(blocks);
    return d;
}

Block para(std::string t) { return Block{BlockKind::Paragraph, std::move(t), std::nullopt}; }

Block table(Cells cells) {
    Block b{BlockKind::Table, "", cells};
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (r) b.text += "\n";
        for (std::size_t c = 0; c < cells[r].size(); ++c) b.text += (c ? " | " : "") + cells[r][c];
    }
    return b;
}

// Scripted analyzer: each stage pops its next reply (the last one repeats).
struct QueueBackend final : AnalyzerBackend {
    std::deque<std::string> s1, s2, s3;
    int calls1 = 0, calls2 = 0, calls3 = 0;
    static std::string pop(std::deque<std::string>& q) {
        auto v = q.front();
        if (q.size() > 1) q.pop_front();
        return v;
    }
    std::string name() const override { return "queue"; }
    BackendReply extract(const std::string&, const PageDocument&, const std::set<std::string>&) override {
        ++calls1;
        return {pop(s1), 10, 5};
    }
    BackendReply relate(const std::string&, const EntitySet&, const PageDocument&) override {
        ++calls2;
        return {pop(s2), 10, 5};
    }
    BackendReply verify(const std::string&, const std::vector<RecordDraft>&, const PageDocument&) override {
        ++calls3;
        return {pop(s3), 10, 5};
    }
};

PromptSet tiny_prompts() { return PromptSet{"S1 {text} {candidates}", "S2 {entities}", "S3 {drafts}"}; }

SourceDescriptor source(std::set<std::string> tags = {"security"}) {
    SourceDescriptor s;
    s.source_id = "src";
    s.domain = "x.example";
    s.status = SourceStatus::Approved;
    s.collection_tags = std::move(tags);
    return s;
}

}  // namespace

TEST_CASE("keyword matching is whole-word and case-insensitive") {
    auto hits = match_keywords("Malicious PACKAGE found; packages, open-source code. Open Source!",
                               {"package", "malicious", "code", "open source", "source"});
    CHECK(hits == std::set<std::string>{"code", "malicious", "open source", "package", "source"});
    CHECK(match_keywords("subpackage codebase", {"package", "code"}).empty());
    CHECK(match_keywords("the ml-package", {"package"}).empty());
}

TEST_CASE("relevance needs a special keyword and enough commons") {
    auto ks = KeywordSet::defaults();
    auto yes = score_text("A malicious package on PyPI ran a script against each user.", ks);
    CHECK(yes.relevant);
    CHECK(yes.matched_special == std::set<std::string>{"pypi"});
    CHECK(yes.matched_common == std::set<std::string>{"malicious", "package", "script", "user"});
    CHECK(yes.score == 4 + 2);
    CHECK_FALSE(score_text("A malicious package ran a script against each user.", ks).relevant);
    CHECK_FALSE(score_text("PyPI package user", ks).relevant);
    CHECK(score_text("PyPI package user", ks, 2).relevant);
}

TEST_CASE("adding keyword text never makes a relevant page irrelevant") {
    auto ks = KeywordSet::defaults();
    std::vector<std::string> words = ks.common;
    words.insert(words.end(), {"npm", "pypi", "weather", "cats", "lunch", "the", "and"});
    std::mt19937 rng(7);
    for (int i = 0; i < 500; ++i) {
        std::string text;
        for (int k = 0; k < 6; ++k) text += words[rng() % words.size()] + " ";
        auto before = score_text(text, ks);
        auto after = score_text(text + words[rng() % words.size()], ks);
        CHECK(after.score >= before.score);
        if (before.relevant) CHECK(after.relevant);
    }
}

TEST_CASE("keyword sets reject overlap") {
    CHECK_THROWS_AS(KeywordSet::make({"npm", "code"}, {"npm"}), Error);
    auto ks = KeywordSet::make({" Code ", "code", ""}, {"PyPI"});
    CHECK(ks.common == std::vector<std::string>{"code"});
    CHECK(ks.special == std::set<std::string>{"pypi"});
}

TEST_CASE("candidate extraction drops dictionary words and numerals") {
    Dictionary dict({"the", "package", "was", "removed", "after", "days", "on"});
    auto c = extract_candidates("The package colorwed was removed after 3 days on 12/03/2023, v1.2 @evil/pkg (exfil_tool).", dict);
    CHECK(c == std::set<std::string>{"@evil/pkg", "colorwed", "exfil_tool", "v1.2"});
    CHECK(extract_candidates("@ - -- ab", dict).empty());
    CandidateOptions o;
    o.min_length = 2;
    CHECK(extract_candidates("ab", dict, o) == std::set<std::string>{"ab"});
}

TEST_CASE("bundled dictionary covers prose vocabulary") {
    auto dict = Dictionary::load_default();
    CHECK(dict.size() > 100000);
    for (auto w : {"malicious", "package", "Repository", "installed", "stealer"}) CHECK(dict.contains(w));
    CHECK_FALSE(dict.contains("colorwed"));
    CHECK_THROWS_AS(Dictionary::load("/nonexistent/dict.txt"), Error);
}

TEST_CASE("entity sets follow the schema strictly") {
    auto e = entity_set_from_json(Json::parse(R"({"package_name":["a"," a ","b",""],"version":"1.0","ioc":null})"));
    CHECK(e.package_names() == std::vector<std::string>{"a", "b"});
    CHECK(e.values(EntityKind::Version) == std::vector<std::string>{"1.0"});
    CHECK_THROWS_AS(entity_set_from_json(Json::parse(R"({"package":["a"]})")), Error);
    CHECK_THROWS_AS(entity_set_from_json(Json::parse(R"({"package_name":[1]})")), Error);
    CHECK_THROWS_AS(entity_set_from_json(Json::parse("[]")), Error);
    auto j = to_json(e);
    CHECK(j.size() == kEntityKindCount);
    CHECK(entity_set_from_json(Json::parse(j.dump())) == e);
}

TEST_CASE("drafts reject unknown fields and blank names") {
    auto ok = drafts_from_json(Json::parse(
        R"({"packages":[{"package_name":" pkg ","version":["1","1"],"discovery_date":"  ","ecosystem":"npm"}]})"));
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].package_name == "pkg");
    CHECK(ok[0].version == std::vector<std::string>{"1"});
    CHECK_FALSE(ok[0].discovery_date);
    CHECK(*ok[0].ecosystem == "NPM");
    CHECK(drafts_from_json(Json::parse(R"([{"package_name":"a"}])")).size() == 1);
    CHECK_THROWS_AS(drafts_from_json(Json::parse(R"({"packages":[{"package_name":"a","extra":1}]})")), Error);
    CHECK_THROWS_AS(drafts_from_json(Json::parse(R"({"packages":[{"package_name":""}]})")), Error);
    CHECK_THROWS_AS(drafts_from_json(Json::parse(R"({"packages":[{"version":["1"]}]})")), Error);
    CHECK_THROWS_AS(drafts_from_json(Json::parse(R"({"packages":[{"package_name":"a","ecosystem":"cargo"}]})")),
                    Error);
    CHECK_THROWS_AS(drafts_from_json(Json::parse(R"({"packages":[],"more":1})")), Error);
}

TEST_CASE("replies are recovered from fences and prose") {
    CHECK(parse_reply_json("```json\n{\"a\":1}\n```")["a"] == 1);
    CHECK(parse_reply_json("Sure! Here it is: {\"a\": 2} Hope that helps.")["a"] == 2);
    CHECK(parse_reply_json(" [1,2] ").size() == 2);
    CHECK_THROWS_AS(parse_reply_json("no json here"), Error);
}

TEST_CASE("prompt placeholders") {
    CHECK(render_prompt("a {x} b {y} {x}", {{"x", "1"}}) == "a 1 b {y} 1");
    CHECK(render_prompt("{unclosed", {{"unclosed", "z"}}) == "{unclosed");
    auto p = PromptSet::load_default();
    for (const auto* s : {&p.stage1, &p.stage2, &p.stage3}) CHECK(s->find("{text}") != std::string::npos);
}

TEST_CASE("a malformed first reply is retried once") {
    QueueBackend b;
    b.s1 = {"garbage", R"({"package_name":["evilpkg"]})"};
    b.s2 = {R"({"packages":[{"package_name":"evilpkg","version":["1.0"]}]})"};
    b.s3 = {R"({"packages":[{"package_name":"evilpkg","version":["1.0"]}]})"};
    MetricsLog m;
    LtmExtractor ltm(b, tiny_prompts(), &m);
    auto out = ltm.run(doc_of({para("The evilpkg 1.0 release on PyPI.")}), {"evilpkg"}, source());
    CHECK(b.calls1 == 2);
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].name == "evilpkg");
    CHECK(*out.records[0].versions == VersionSet{"1.0"});
    CHECK(m.entries().size() == 3);
    CHECK(m.entries()[0].stage == "stage1");
    CHECK(m.entries()[0].backend == "queue");
}

TEST_CASE("two malformed replies raise an extraction error with the raw text") {
    QueueBackend b;
    b.s1 = {"still not json"};
    LtmExtractor ltm(b, tiny_prompts());
    try {
        ltm.stage1_extract(doc_of({para("x")}), {});
        FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
        CHECK(e.kind() == ErrorKind::ExtractionFailed);
        CHECK(e.raw_response() == "still not json");
    }
    CHECK(b.calls1 == 2);
}

TEST_CASE("later stages cannot invent packages") {
    QueueBackend b;
    b.s1 = {R"({"package_name":["realpkg"]})"};
    b.s2 = {R"({"packages":[{"package_name":"realpkg"},{"package_name":"ghost"},{"package_name":"RealPkg","ioc":["1.2.3.4"]}]})"};
    b.s3 = {R"({"packages":[{"package_name":"realpkg","ioc":["1.2.3.4"]},{"package_name":"other"}]})"};
    LtmExtractor ltm(b, tiny_prompts());
    auto out = ltm.run(doc_of({para("realpkg phoned 1.2.3.4")}), {"realpkg"}, source());
    REQUIRE(out.drafts.size() == 1);
    CHECK(out.drafts[0].package_name == "realpkg");
    CHECK(out.drafts[0].ioc == std::vector<std::string>{"1.2.3.4"});
}

TEST_CASE("unusable verification keeps drafts marked unverified") {
    QueueBackend b;
    b.s1 = {R"({"package_name":["realpkg"]})"};
    b.s2 = {R"({"packages":[{"package_name":"realpkg"}]})"};
    b.s3 = {"nope"};
    LtmExtractor ltm(b, tiny_prompts());
    auto out = ltm.run(doc_of({para("realpkg on PyPI")}), {"realpkg"}, source());
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].notes == std::vector<std::string>{"unverified"});
    CHECK(b.calls3 == 2);
}

TEST_CASE("grounding drops names absent from the page") {
    std::vector<RecordDraft> drafts(3);
    drafts[0].package_name = "present";
    drafts[1].package_name = "hallucinated";
    drafts[2].package_name = "CandidateOnly";
    std::vector<std::string> dropped;
    auto kept = ground_check(drafts, doc_of({para("the Present package")}), {"candidateonly"}, &dropped);
    REQUIRE(kept.size() == 2);
    CHECK(dropped == std::vector<std::string>{"hallucinated"});
    CHECK(contains_word("use @evil/pkg now", "@evil/pkg"));
    CHECK_FALSE(contains_word("presently", "present"));
}

TEST_CASE("draft to record: ecosystem inference and date notes") {
    std::vector<RecordDraft> d(5);
    d[0].package_name = "@scope/Thing";
    d[1].package_name = "Some_Pkg";
    d[1].discovery_date = "03/10/23";
    d[2].package_name = "explicit";
    d[2].ecosystem = "NPM";
    d[3].package_name = "late";
    d[3].discovery_date = "2025-01-01";
    d[4].package_name = "weird";
    d[4].discovery_date = "sometime last spring";
    auto doc = doc_of({});
    auto r = to_records(d, doc, source());
    REQUIRE(r.size() == 5);
    CHECK(r[0].ecosystem == Ecosystem::NPM);
    CHECK(r[0].name == "@scope/thing");
    CHECK(r[1].ecosystem == Ecosystem::PyPI);
    CHECK(r[1].name == "some-pkg");
    CHECK(r[1].discovery_date->to_iso() == "2023-10-03");
    CHECK_FALSE(r[1].versions.has_value());
    CHECK(r[2].ecosystem == Ecosystem::NPM);
    CHECK_FALSE(r[3].discovery_date);
    CHECK(r[3].notes.size() == 1);
    CHECK_FALSE(r[4].discovery_date);
    CHECK(r[4].notes[0].find("sometime last spring") != std::string::npos);
    CHECK(r[0].source_id == "src");
    CHECK(r[0].collected_at == doc.fetched_at);

    auto npm_only = to_records({d[1]}, doc, source({"npm"}));
    CHECK(npm_only[0].ecosystem == Ecosystem::NPM);
}

TEST_CASE("analysis text falls back to markup") {
    PageDocument d;
    d.raw_markup = "<div>hello <b>there</b></div>";
    CHECK(analysis_text(d).find("hello") != std::string::npos);
    CHECK(analysis_text(doc_of({para("blocky")})) == "blocky");
}

TEST_CASE("header classification") {
    bool eco = false;
    CHECK(classify_header("Package Name") == EntityKind::PackageName);
    CHECK(classify_header("Version(s)") == EntityKind::Version);
    CHECK(classify_header("Discovered") == EntityKind::DiscoveryDate);
    CHECK(classify_header("IOCs") == EntityKind::Ioc);
    CHECK_FALSE(classify_header("Registry", &eco).has_value());
    CHECK(eco);
    CHECK_FALSE(classify_header("Notes").has_value());
}

TEST_CASE("segments split sentences and tag table rows") {
    auto doc = doc_of({para("First sentence here. Second one follows."),
                       table({{"Package", "Version"}, {"badpkg", "0.1"}})});
    auto segs = segment_document(doc);
    REQUIRE(segs.size() >= 3);
    CHECK(segs[0].text == "First sentence here.");
    CHECK(segs[1].text == "Second one follows.");
    const auto& row = segs.back();
    CHECK(row.typed_row);
    CHECK(row.block == 1);
    CHECK(row.cells == std::vector<std::pair<EntityKind, std::string>>{{EntityKind::PackageName, "badpkg"},
                                                                       {EntityKind::Version, "0.1"}});
}

TEST_CASE("deterministic backend reads tables and prose") {
    DeterministicBackend b;
    auto doc = doc_of({para("Researchers found malicious packages on PyPI."),
                       table({{"Package", "Version", "Date"}, {"badpkg", "0.1", "12/03/2023"}, {"worsepkg", "2.0", ""}}),
                       para("The package sneaky-lib stole tokens and sent them to 10.0.0.7.")});
    auto dict = Dictionary::load_default();
    auto cands = extract_candidates(analysis_text(doc), dict);
    LtmExtractor ltm(b, PromptSet::load_default());
    auto out = ltm.run(doc, cands, source());
    std::map<std::string, IntelRecord> by;
    for (const auto& r : out.records) by[r.name] = r;
    REQUIRE(by.count("badpkg"));
    REQUIRE(by.count("worsepkg"));
    REQUIRE(by.count("sneaky-lib"));
    CHECK(*by["badpkg"].versions == VersionSet{"0.1"});
    CHECK(by["badpkg"].discovery_date->to_iso() == "2023-03-12");
    CHECK_FALSE(by["worsepkg"].discovery_date);
    CHECK(by["sneaky-lib"].iocs.count("10.0.0.7"));
    CHECK_FALSE(by.count("researchers"));

    // same input, same output
    auto again = ltm.run(doc, cands, source());
    CHECK(again.records == out.records);
}

TEST_CASE("deterministic verification strips values not in the text") {
    DeterministicBackend b;
    RecordDraft d;
    d.package_name = "badpkg";
    d.version = {"0.1", "9.9"};
    d.attack_method = "typosquatting";
    RecordDraft ghost;
    ghost.package_name = "ghost";
    auto v = b.verify_drafts({d, ghost}, doc_of({para("badpkg 0.1 was found")}));
    REQUIRE(v.size() == 1);
    CHECK(v[0].version == std::vector<std::string>{"0.1"});
    CHECK_FALSE(v[0].attack_method);
}

TEST_CASE("a paragraph naming colorwed and its payload URL") {
    DeterministicBackend b;
    auto doc = doc_of({para("The malicious PyPI package colorwed fetched a second stage from "
                            "https://paste.example/raw/x1 during installation.")});
    auto cands = extract_candidates(analysis_text(doc), Dictionary::load_default());
    CHECK(cands.count("colorwed"));
    auto e = b.extract_entities(doc, cands);
    CHECK(e.package_names() == std::vector<std::string>{"colorwed"});
    CHECK(e.values(EntityKind::Ioc) == std::vector<std::string>{"https://paste.example/raw/x1"});
}
