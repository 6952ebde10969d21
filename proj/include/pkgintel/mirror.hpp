#pragma once

// Downstream registry mirror audit.

#include <map>
#include <string>
#include <vector>

#include "pkgintel/http.hpp"
#include "pkgintel/store.hpp"

namespace pkgintel {

enum class ProbeStyle { PypiSimple, NpmRegistry };
std::string to_string(ProbeStyle s);
ProbeStyle parse_probe_style(std::string_view text);

struct MirrorTarget {
    std::string label;
    Ecosystem ecosystem = Ecosystem::PyPI;
    std::string base_url;
    ProbeStyle style = ProbeStyle::PypiSimple;

    bool operator==(const MirrorTarget&) const = default;
    /// http(s) base, non-blank label, style matching the ecosystem. Throws Error(InvalidArgument).
    void validate() const;
};

/// JSON array of {label, ecosystem, base_url, probe_style}.
std::vector<MirrorTarget> mirrors_from_json(const Json& j);
std::vector<MirrorTarget> load_mirror_list(const std::string& path);
OrderedJson to_json(const std::vector<MirrorTarget>& mirrors);

enum class Presence { Present, Absent, Unknown };
std::string to_string(Presence p);

struct ProbeResult {
    Presence presence = Presence::Unknown;
    VersionSet versions;
    int http_status = 0;  // 0: no response
    int attempts = 0;
    std::string error;
    Timestamp probed_at;
};

/// Version strings from simple-index file names (sdist, wheel, egg) of `name`.
VersionSet versions_from_filenames(const std::vector<std::string>& filenames, const std::string& name);
/// File names linked from a simple-index page.
std::vector<std::string> simple_index_files(std::string_view markup);

/// Absent only on 404/410 or an index without files; transport failures, 5xx after the
/// retry budget and unexpected answers are Unknown.
ProbeResult probe_package(const MirrorTarget& mirror, const std::string& name, const CrawlPolicy& policy,
                          HttpClient& client, RateLimiter& limiter, Clock& clock);

struct MirrorRow {
    std::string package;
    Ecosystem ecosystem = Ecosystem::PyPI;
    std::string mirror;
    ProbeResult result;
};

struct MirrorSummary {
    std::size_t present = 0;
    std::size_t absent = 0;
    std::size_t unknown = 0;

    bool operator==(const MirrorSummary&) const = default;
};

struct MirrorReport {
    std::vector<MirrorRow> rows;  // sorted by (package, mirror)
    std::map<std::string, MirrorSummary> summary;
};

/// Probes every stored name against each mirror of its ecosystem. Mirrors run in
/// parallel; requests to one host are spaced by the shared limiter.
MirrorReport scan_mirrors(const std::vector<AggregatedIntel>& packages, const std::vector<MirrorTarget>& mirrors,
                          const CrawlPolicy& policy, HttpClient& client, Clock& clock, RateLimiter& limiter);
MirrorReport scan_mirrors(const IntelStore& store, const std::vector<MirrorTarget>& mirrors,
                          const CrawlPolicy& policy, HttpClient& client, Clock& clock, RateLimiter& limiter);

/// package,versions,mirror,present,status,probed_at
std::string report_csv(const MirrorReport& report);
/// One line per package, one column per mirror (Y present, - absent, ? unknown).
std::string render_mirror_table(const MirrorReport& report);
OrderedJson to_json(const MirrorReport& report);

}  // namespace pkgintel
