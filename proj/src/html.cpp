#include "pkgintel/html.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

#include "pkgintel/strings.hpp"

namespace pkgintel::html {

namespace {

constexpr std::array<std::string_view, 16> kVoid{"area", "base", "br", "col", "embed", "hr", "img", "input",
                                                 "link", "meta", "param", "source", "track", "wbr", "keygen",
                                                 "frame"};
constexpr std::array<std::string_view, 5> kRawText{"script", "style", "textarea", "xmp", "noscript"};
constexpr std::array<std::string_view, 34> kBlock{
    "address", "article", "aside", "blockquote", "body", "dd", "details", "div", "dl", "dt", "fieldset",
    "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li",
    "main", "nav", "ol", "p", "pre", "section", "table", "ul", "tr", "html"};
// Opening any of these closes an open <p>.
constexpr std::array<std::string_view, 28> kClosesP{
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figcaption", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "nav", "ol", "p", "pre",
    "section", "table", "ul"};
// Allowed to be left open without a warning.
constexpr std::array<std::string_view, 14> kOptionalEnd{"p", "li", "td", "th", "tr", "thead", "tbody", "tfoot",
                                                        "html", "body", "head", "dt", "dd", "option"};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view tag) {
    return std::find(set.begin(), set.end(), tag) != set.end();
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

struct NamedEntity {
    std::string_view name;
    std::uint32_t cp;
};

constexpr std::array<NamedEntity, 22> kEntities{{
    {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
    {"nbsp", ' '},     {"copy", 0xA9},    {"reg", 0xAE},     {"trade", 0x2122}, {"hellip", 0x2026},
    {"mdash", 0x2014}, {"ndash", 0x2013}, {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C},
    {"rdquo", 0x201D}, {"bull", 0x2022},  {"middot", 0xB7},  {"laquo", 0xAB},   {"raquo", 0xBB},
    {"times", 0xD7},   {"shy", 0xAD},
}};

class TreeBuilder {
public:
    explicit TreeBuilder(Document& doc) : doc_(doc) {
        doc_.root.type = Node::Type::Document;
        stack_.push_back(&doc_.root);
    }

    void text(std::string_view raw) {
        if (raw.empty()) return;
        Node& top = *stack_.back();
        std::string decoded = decode_entities(raw);
        if (!top.children.empty() && top.children.back().type == Node::Type::Text) {
            top.children.back().text += decoded;
            return;
        }
        Node n;
        n.type = Node::Type::Text;
        n.text = std::move(decoded);
        top.children.push_back(std::move(n));
    }

    void raw_text(std::string raw) {
        Node n;
        n.type = Node::Type::Text;
        n.text = std::move(raw);
        stack_.back()->children.push_back(std::move(n));
    }

    void open(Node element, bool self_closing) {
        const std::string tag = element.tag;
        apply_implied_ends(tag);
        Node& top = *stack_.back();
        top.children.push_back(std::move(element));
        if (in(kVoid, tag) || self_closing) return;
        stack_.push_back(&top.children.back());
    }

    void close(std::string_view tag) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) {
                for (std::size_t j = stack_.size() - 1; j > i; --j) {
                    if (!in(kOptionalEnd, stack_[j]->tag))
                        doc_.warnings.push_back("implicitly closed <" + stack_[j]->tag + "> at </" +
                                                std::string(tag) + ">");
                }
                stack_.resize(i);
                return;
            }
        }
        if (!in(kVoid, tag)) doc_.warnings.push_back("stray end tag </" + std::string(tag) + ">");
    }

    void finish() {
        for (std::size_t j = stack_.size(); j-- > 1;)
            if (!in(kOptionalEnd, stack_[j]->tag)) doc_.warnings.push_back("unclosed <" + stack_[j]->tag + ">");
        stack_.resize(1);
    }

    const std::string& top_tag() const { return stack_.back()->tag; }

private:
    bool in_scope(std::string_view tag, std::initializer_list<std::string_view> barriers) const {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) return true;
            for (auto b : barriers)
                if (stack_[i]->tag == b) return false;
        }
        return false;
    }

    void close_if_in_scope(std::string_view tag, std::initializer_list<std::string_view> barriers) {
        if (in_scope(tag, barriers)) close_silently(tag);
    }

    void close_silently(std::string_view tag) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) {
                stack_.resize(i);
                return;
            }
        }
    }

    void apply_implied_ends(const std::string& tag) {
        if (in(kClosesP, tag)) close_if_in_scope("p", {"div", "td", "th", "li", "table", "article", "section",
                                                      "main", "body", "blockquote", "button"});
        if (tag == "li") close_if_in_scope("li", {"ul", "ol", "menu"});
        if (tag == "dt" || tag == "dd") {
            close_if_in_scope("dt", {"dl"});
            close_if_in_scope("dd", {"dl"});
        }
        if (tag == "td" || tag == "th") {
            close_if_in_scope("td", {"tr", "table"});
            close_if_in_scope("th", {"tr", "table"});
        }
        if (tag == "tr") {
            close_if_in_scope("td", {"table"});
            close_if_in_scope("th", {"table"});
            close_if_in_scope("tr", {"table"});
        }
        if (tag == "thead" || tag == "tbody" || tag == "tfoot") {
            for (auto t : {"td", "th", "tr", "thead", "tbody", "tfoot"}) close_if_in_scope(t, {"table"});
        }
        if (tag == "option") close_if_in_scope("option", {"select"});
    }

    Document& doc_;
    std::vector<Node*> stack_;
};

bool is_name_char(char c) { return !str::is_space(c) && c != '>' && c != '/' && c != '=' && c != '<'; }

}  // namespace

const std::string* Node::attr(std::string_view name) const {
    for (const auto& [k, v] : attrs)
        if (k == name) return &v;
    return nullptr;
}

bool Node::has_class(std::string_view cls) const {
    const auto* c = attr("class");
    if (!c) return false;
    for (const auto& part : str::split(*c, ' '))
        if (str::iequals(part, cls)) return true;
    return false;
}

bool is_non_content(std::string_view tag) {
    return tag == "script" || tag == "style" || tag == "noscript" || tag == "template" || tag == "head" ||
           tag == "svg" || tag == "title";
}

bool is_block_level(std::string_view tag) { return in(kBlock, tag) || tag == "td" || tag == "th" || tag == "br"; }

std::string decode_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out += text[i];
            continue;
        }
        auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out += '&';
            continue;
        }
        auto body = text.substr(i + 1, semi - i - 1);
        if (!body.empty() && body[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = body.size() > 1;
            if (ok && (body[1] == 'x' || body[1] == 'X')) {
                ok = body.size() > 2;
                for (char c : body.substr(2)) {
                    int v = str::is_digit(c) ? c - '0' : (c >= 'a' && c <= 'f') ? c - 'a' + 10 : (c >= 'A' && c <= 'F') ? c - 'A' + 10 : -1;
                    if (v < 0 || cp > 0x10FFFF) { ok = false; break; }
                    cp = cp * 16 + static_cast<std::uint32_t>(v);
                }
            } else if (ok) {
                for (char c : body.substr(1)) {
                    if (!str::is_digit(c) || cp > 0x10FFFF) { ok = false; break; }
                    cp = cp * 10 + static_cast<std::uint32_t>(c - '0');
                }
            }
            if (ok) {
                append_utf8(out, cp == 0xA0 ? ' ' : cp);
                i = semi;
                continue;
            }
        } else {
            auto it = std::find_if(kEntities.begin(), kEntities.end(), [&](const NamedEntity& e) { return e.name == body; });
            if (it != kEntities.end()) {
                append_utf8(out, it->cp);
                i = semi;
                continue;
            }
        }
        out += '&';
    }
    return out;
}

Document parse(std::string_view m) {
    Document doc;
    TreeBuilder builder(doc);
    std::size_t i = 0;
    std::size_t text_start = 0;
    auto flush_text = [&](std::size_t end) {
        if (end > text_start) builder.text(m.substr(text_start, end - text_start));
    };
    while (i < m.size()) {
        if (m[i] != '<') {
            ++i;
            continue;
        }
        // Comments, doctype, CDATA, processing instructions.
        if (m.compare(i, 4, "<!--") == 0) {
            flush_text(i);
            auto end = m.find("-->", i + 4);
            if (end == std::string_view::npos) {
                doc.warnings.push_back("unterminated comment");
                i = m.size();
            } else {
                i = end + 3;
            }
            text_start = i;
            continue;
        }
        if (i + 1 < m.size() && (m[i + 1] == '!' || m[i + 1] == '?')) {
            flush_text(i);
            auto end = m.find('>', i);
            i = end == std::string_view::npos ? m.size() : end + 1;
            text_start = i;
            continue;
        }
        const bool closing = i + 1 < m.size() && m[i + 1] == '/';
        std::size_t j = i + (closing ? 2 : 1);
        if (j >= m.size() || !str::is_alpha(m[j])) {
            ++i;  // literal '<'
            continue;
        }
        flush_text(i);
        std::size_t name_start = j;
        while (j < m.size() && is_name_char(m[j])) ++j;
        std::string tag = str::to_lower(m.substr(name_start, j - name_start));

        Node el;
        el.type = Node::Type::Element;
        el.tag = tag;
        bool self_closing = false;
        // Attributes.
        while (j < m.size() && m[j] != '>') {
            if (str::is_space(m[j])) { ++j; continue; }
            if (m[j] == '/') {
                self_closing = j + 1 < m.size() && m[j + 1] == '>';
                ++j;
                continue;
            }
            std::size_t an = j;
            while (j < m.size() && is_name_char(m[j])) ++j;
            if (j == an) { ++j; continue; }
            std::string name = str::to_lower(m.substr(an, j - an));
            while (j < m.size() && str::is_space(m[j])) ++j;
            std::string value;
            if (j < m.size() && m[j] == '=') {
                ++j;
                while (j < m.size() && str::is_space(m[j])) ++j;
                if (j < m.size() && (m[j] == '"' || m[j] == '\'')) {
                    char q = m[j++];
                    auto end = m.find(q, j);
                    if (end == std::string_view::npos) {
                        doc.warnings.push_back("unterminated attribute value in <" + tag + ">");
                        end = m.size();
                    }
                    value = decode_entities(m.substr(j, end - j));
                    j = end < m.size() ? end + 1 : end;
                } else {
                    std::size_t vs = j;
                    while (j < m.size() && !str::is_space(m[j]) && m[j] != '>') ++j;
                    value = decode_entities(m.substr(vs, j - vs));
                }
            }
            if (!closing && !el.attr(name)) el.attrs.emplace_back(std::move(name), std::move(value));
        }
        if (j >= m.size()) {
            doc.warnings.push_back("unterminated tag <" + tag + ">");
            i = m.size();
            text_start = i;
            break;
        }
        i = j + 1;
        text_start = i;
        if (closing) {
            builder.close(tag);
            continue;
        }
        builder.open(std::move(el), self_closing);
        if (in(kRawText, tag) && !self_closing) {
            std::string close_tag = "</" + tag;
            std::size_t end = i;
            while (true) {
                end = m.find("</", end);
                if (end == std::string_view::npos) break;
                if (str::iequals(m.substr(end, close_tag.size()), close_tag)) break;
                end += 2;
            }
            if (end == std::string_view::npos) {
                doc.warnings.push_back("unterminated <" + tag + ">");
                end = m.size();
            }
            builder.raw_text(std::string(m.substr(i, end - i)));
            builder.close(tag);
            auto gt = m.find('>', end);
            i = (end == m.size() || gt == std::string_view::npos) ? m.size() : gt + 1;
            text_start = i;
        }
    }
    flush_text(m.size());
    builder.finish();
    return doc;
}

namespace {

void collect_text(const Node& n, std::string& out) {
    if (n.type == Node::Type::Text) {
        out += n.text;
        return;
    }
    if (n.type == Node::Type::Element && is_non_content(n.tag)) return;
    const bool block = n.type == Node::Type::Element && is_block_level(n.tag);
    if (block) out += '\n';
    if (n.is_element("td") || n.is_element("th")) out += ' ';
    for (const auto& c : n.children) collect_text(c, out);
    if (block) out += '\n';
}

}  // namespace

std::string text_content(const Node& node) {
    std::string raw;
    collect_text(node, raw);
    std::vector<std::string> lines;
    for (auto& line : str::split(raw, '\n')) {
        auto collapsed = str::collapse_whitespace(line);
        if (!collapsed.empty()) lines.push_back(std::move(collapsed));
    }
    return str::join(lines, "\n");
}

namespace {

void walk_impl(const Node& n, std::vector<const Node*>& ancestors, const Visitor& visit) {
    if (!visit(n, ancestors)) return;
    if (n.type == Node::Type::Text) return;
    const bool push = n.type == Node::Type::Element;
    if (push) ancestors.push_back(&n);
    for (const auto& c : n.children) walk_impl(c, ancestors, visit);
    if (push) ancestors.pop_back();
}

}  // namespace

void walk(const Node& root, const Visitor& visit) {
    std::vector<const Node*> ancestors;
    walk_impl(root, ancestors, visit);
}

}  // namespace pkgintel::html
