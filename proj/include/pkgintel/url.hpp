#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace pkgintel {

struct Url {
    std::string scheme;  // lowercase
    std::string host;    // lowercase
    int port = 0;        // 0 = scheme default
    std::string path = "/";
    std::string query;   // without '?'
    std::string fragment;

    bool is_http() const { return scheme == "http" || scheme == "https"; }
    /// scheme://host[:port]
    std::string origin() const;
    /// path[?query]
    std::string target() const;
    /// Serialized without the fragment.
    std::string str() const;
};

/// Absolute URLs only; std::nullopt for anything unparseable.
std::optional<Url> parse_url(std::string_view text);

/// Standard relative reference resolution (scheme-relative, absolute-path, relative-path, query-only).
std::optional<Url> resolve_url(const Url& base, std::string_view reference);

/// Lowercased host with a leading "www." removed.
std::string normalize_domain(std::string_view host);

/// Percent-encodes every byte outside the unreserved set.
std::string url_encode(std::string_view s);
std::string url_decode(std::string_view s);

}  // namespace pkgintel
