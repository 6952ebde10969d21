#include "pkgintel/url.hpp"

#include <vector>

#include "pkgintel/strings.hpp"

namespace pkgintel {

namespace {

int default_port(const std::string& scheme) {
    if (scheme == "http") return 80;
    if (scheme == "https") return 443;
    return 0;
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> out;
    auto parts = str::split(path, '/');
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& seg = parts[i];
        if (seg == ".") {
            if (i + 1 == parts.size()) out.emplace_back();
            continue;
        }
        if (seg == "..") {
            if (out.size() > 1) out.pop_back();
            if (i + 1 == parts.size()) out.emplace_back();
            continue;
        }
        out.push_back(seg);
    }
    std::string joined = str::join(out, "/");
    if (joined.empty() || joined.front() != '/') joined.insert(joined.begin(), '/');
    return joined;
}

}  // namespace

std::string Url::origin() const {
    std::string o = scheme + "://" + host;
    if (port != 0 && port != default_port(scheme)) o += ":" + std::to_string(port);
    return o;
}

std::string Url::target() const { return query.empty() ? path : path + "?" + query; }

std::string Url::str() const { return origin() + target(); }

std::optional<Url> parse_url(std::string_view text) {
    auto t = str::trim(text);
    auto colon = t.find("://");
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    Url u;
    u.scheme = str::to_lower(t.substr(0, colon));
    for (char c : u.scheme)
        if (!str::is_alnum(c) && c != '+' && c != '-' && c != '.') return std::nullopt;
    auto rest = t.substr(colon + 3);
    auto authority_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, authority_end);
    rest = authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);
    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
    if (authority.empty()) return std::nullopt;
    if (auto pc = authority.rfind(':'); pc != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        auto port_text = authority.substr(pc + 1);
        authority = authority.substr(0, pc);
        if (!port_text.empty()) {
            int port = 0;
            for (char c : port_text) {
                if (!str::is_digit(c)) return std::nullopt;
                port = port * 10 + (c - '0');
                if (port > 65535) return std::nullopt;
            }
            u.port = port;
        }
    }
    u.host = str::to_lower(authority);
    if (u.host.empty()) return std::nullopt;
    for (char c : u.host)
        if (!(str::is_alnum(c) || c == '-' || c == '.' || c == '_' || c == '[' || c == ']' || c == ':'))
            return std::nullopt;
    if (auto hash = rest.find('#'); hash != std::string_view::npos) {
        u.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    if (auto q = rest.find('?'); q != std::string_view::npos) {
        u.query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    u.path = rest.empty() ? "/" : remove_dot_segments(rest);
    if (u.port == default_port(u.scheme)) u.port = 0;
    return u;
}

std::optional<Url> resolve_url(const Url& base, std::string_view reference) {
    auto ref = str::trim(reference);
    if (ref.empty()) return base;
    if (ref.find("://") != std::string_view::npos) {
        auto scheme_end = ref.find("://");
        bool scheme_like = true;
        for (char c : ref.substr(0, scheme_end))
            if (!str::is_alnum(c) && c != '+' && c != '-' && c != '.') scheme_like = false;
        if (scheme_like) return parse_url(ref);
    }
    if (auto colon = ref.find(':'); colon != std::string_view::npos) {
        // mailto:, javascript:, tel: and friends.
        auto slash = ref.find_first_of("/?#");
        if (slash == std::string_view::npos || colon < slash) return std::nullopt;
    }
    if (ref.substr(0, 2) == "//") return parse_url(base.scheme + ":" + std::string(ref));

    Url out = base;
    out.fragment.clear();
    std::string_view r = ref;
    std::string fragment;
    if (auto hash = r.find('#'); hash != std::string_view::npos) {
        fragment = std::string(r.substr(hash + 1));
        r = r.substr(0, hash);
    }
    std::string query;
    bool has_query = false;
    if (auto q = r.find('?'); q != std::string_view::npos) {
        query = std::string(r.substr(q + 1));
        has_query = true;
        r = r.substr(0, q);
    }
    if (r.empty()) {
        if (has_query) out.query = query;
    } else if (r.front() == '/') {
        out.path = remove_dot_segments(r);
        out.query = query;
    } else {
        auto dir = base.path.substr(0, base.path.rfind('/') + 1);
        out.path = remove_dot_segments(dir + std::string(r));
        out.query = query;
    }
    out.fragment = fragment;
    return out;
}

std::string normalize_domain(std::string_view host) {
    auto h = str::to_lower(str::trim(host));
    while (!h.empty() && h.back() == '.') h.pop_back();
    if (h.rfind("www.", 0) == 0) h.erase(0, 4);
    return h;
}

std::string url_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += kHex[c >> 4];
            out += kHex[c & 15];
        }
    }
    return out;
}

std::string url_decode(std::string_view s) {
    auto hexval = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int hi = hexval(s[i + 1]), lo = hexval(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out += static_cast<char>(hi * 16 + lo);
                i += 2;
                continue;
            }
        }
        out += (s[i] == '+') ? ' ' : s[i];
    }
    return out;
}

}  // namespace pkgintel
