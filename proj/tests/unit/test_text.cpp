#include <doctest.h>

#include "pkgintel/csv.hpp"
#include "pkgintel/html.hpp"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

using namespace pkgintel;

TEST_CASE("urls parse, resolve and normalize") {
    auto u = parse_url("HTTPS://Blog.Example.com:8443/a/b?x=1#frag");
    REQUIRE(u);
    CHECK(u->scheme == "https");
    CHECK(u->host == "blog.example.com");
    CHECK(u->port == 8443);
    CHECK(u->path == "/a/b");
    CHECK(u->query == "x=1");
    CHECK(u->str() == "https://blog.example.com:8443/a/b?x=1");
    CHECK_FALSE(parse_url("/relative/only"));
    CHECK_FALSE(parse_url("not a url"));

    auto base = *parse_url("https://example.com/blog/2023/post.html");
    CHECK(resolve_url(base, "other.html")->str() == "https://example.com/blog/2023/other.html");
    CHECK(resolve_url(base, "/data/x.csv")->str() == "https://example.com/data/x.csv");
    CHECK(resolve_url(base, "//cdn.example.com/a")->str() == "https://cdn.example.com/a");
    CHECK(resolve_url(base, "../up.html")->str() == "https://example.com/blog/up.html");
    CHECK(resolve_url(base, "?page=2")->str() == "https://example.com/blog/2023/post.html?page=2");

    CHECK(normalize_domain("WWW.Snyk.IO") == "snyk.io");
    CHECK(url_decode(url_encode("@scope/name x")) == "@scope/name x");
    CHECK(url_encode("@scope/name") == "%40scope%2Fname");
}

TEST_CASE("html tree recovers structure of sloppy markup") {
    auto doc = html::parse("<p>one<p>two &amp; three<ul><li>a<li>b</ul><script>var x='<p>';</script><br/>");
    std::vector<std::string> tags;
    html::walk(doc.root, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (n.type == html::Node::Type::Element) tags.push_back(n.tag);
        return true;
    });
    CHECK(std::count(tags.begin(), tags.end(), "p") == 2);
    CHECK(std::count(tags.begin(), tags.end(), "li") == 2);
    const auto text = html::text_content(doc.root);
    CHECK(text.find("two & three") != std::string::npos);
    CHECK(text.find("var x") == std::string::npos);
    CHECK(html::decode_entities("&lt;a&gt; &#64; &#x41; &quot;") == "<a> @ A \"");
}

TEST_CASE("html attributes and classes") {
    auto doc = html::parse(R"(<div class="post main" data-x='1'><a HREF="/x">y</a></div>)");
    const html::Node* div = nullptr;
    const html::Node* a = nullptr;
    html::walk(doc.root, [&](const html::Node& n, const std::vector<const html::Node*>& anc) {
        if (n.is_element("div")) div = &n;
        if (n.is_element("a")) {
            a = &n;
            CHECK(anc.back()->is_element("div"));
        }
        return true;
    });
    REQUIRE(div);
    REQUIRE(a);
    CHECK(div->has_class("main"));
    CHECK_FALSE(div->has_class("mai"));
    CHECK(*div->attr("data-x") == "1");
    CHECK(*a->attr("href") == "/x");
    CHECK(a->attr("title") == nullptr);
}

TEST_CASE("csv handles quotes, CRLF and blank lines") {
    auto t = csv::parse("a,b,c\r\n\"x, y\",\"he said \"\"hi\"\"\",\n\nlast\n");
    REQUIRE(t.size() == 3);
    CHECK(t[1][0] == "x, y");
    CHECK(t[1][1] == "he said \"hi\"");
    CHECK(t[1][2] == "");
    CHECK(t[2].size() == 1);
    csv::make_rectangular(t);
    CHECK(t[2].size() == 3);
    CHECK(csv::format_row({"a,b", "c\"d", "e"}) == "\"a,b\",\"c\"\"d\",e");
}

TEST_CASE("string helpers") {
    CHECK(str::trim("  x y \n") == "x y");
    CHECK(str::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
    CHECK(str::join(std::vector<std::string>{"a", "b"}, ", ") == "a, b");
    CHECK(str::to_lower("MiXeD") == "mixed");
    CHECK(str::ends_with_icase("file.CSV", ".csv"));
}
