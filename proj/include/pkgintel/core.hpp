#pragma once

// Shared domain types: ecosystems, calendar dates, collection timestamps and the
// per-source / aggregated intelligence records.

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pkgintel/error.hpp"

namespace pkgintel {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class Ecosystem { PyPI, NPM };

/// "PyPI" / "NPM".
std::string to_string(Ecosystem eco);
/// Case-insensitive; accepts "pypi", "npm".
Ecosystem parse_ecosystem(std::string_view text);
/// Identifier used by the OSV schema ("PyPI", "npm").
std::string osv_ecosystem_name(Ecosystem eco);

/// Two-digit years are read as 2000 + yy.
inline constexpr int kTwoDigitYearBase = 2000;

struct FlexDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const FlexDate&) const = default;

    static bool valid(int year, int month, int day);
    static FlexDate from_days(std::int64_t days_since_epoch);

    std::int64_t days_since_epoch() const;
    std::string to_iso() const;
    /// DD/MM/YY, the notation used in published timeliness tables.
    std::string to_short() const;
};

/// Day-first for numeric forms. Accepts DD/MM/YY, DD/MM/YYYY, YYYY-MM-DD and
/// "September 26, 2022" / "26 September 2022". Throws Error(Parse).
FlexDate parse_flexible_date(std::string_view text);
std::optional<FlexDate> try_parse_flexible_date(std::string_view text);

/// later - earlier in calendar days.
std::int64_t days_between(const FlexDate& earlier, const FlexDate& later);

/// Seconds since the Unix epoch, UTC.
struct Timestamp {
    std::int64_t seconds = 0;

    auto operator<=>(const Timestamp&) const = default;

    FlexDate date() const;
    /// 2023-10-03T12:00:00Z
    std::string to_iso() const;
    static Timestamp parse_iso(std::string_view text);
    static Timestamp from_date(const FlexDate& d, int hour = 0, int minute = 0, int second = 0);
};

/// Canonical package name. PyPI: lowercase, runs of [-_.] become '-'. NPM: lowercase.
/// Throws Error(InvalidName) for blank input.
std::string normalize_name(std::string_view raw, Ecosystem eco);

/// std::nullopt is the NaN marker. For versions, nullopt means "unknown" while an
/// empty set means "reported none".
using OptString = std::optional<std::string>;
using VersionSet = std::set<std::string>;
using OptVersions = std::optional<VersionSet>;

struct IntelRecord {
    std::string name;
    OptVersions versions;
    std::optional<FlexDate> discovery_date;
    OptString repo_url;
    OptString attack_method;
    OptString discoverer;
    OptString impacted_systems;
    OptString attack_vector;
    std::set<std::string> iocs;
    Timestamp collected_at;
    std::string source_id;
    std::string page_url;
    Ecosystem ecosystem = Ecosystem::PyPI;
    /// Free-form processing notes (e.g. an unparseable date string). Serialized only when non-empty.
    std::vector<std::string> notes;

    bool operator==(const IntelRecord&) const = default;
};

struct Provenance {
    std::string source_id;
    std::string page_url;
    Timestamp collected_at;

    auto operator<=>(const Provenance&) const = default;
};

struct AggregatedIntel {
    std::string name;
    Ecosystem ecosystem = Ecosystem::PyPI;
    OptVersions versions;
    std::optional<FlexDate> discovery_date;
    OptString repo_url;
    OptString attack_method;
    OptString discoverer;
    OptString impacted_systems;
    OptString attack_vector;
    std::set<std::string> iocs;
    std::vector<Provenance> provenance;
    int confirmation_count = 0;

    bool operator==(const AggregatedIntel&) const = default;
};

/// Checks the record invariants (canonical non-empty name, F <= T, non-blank IOCs).
/// Throws Error(InvalidArgument) describing the first violation.
void validate(const IntelRecord& rec);

OrderedJson to_json(const IntelRecord& rec);
IntelRecord record_from_json(const Json& j);
OrderedJson to_json(const AggregatedIntel& agg);
AggregatedIntel aggregate_from_json(const Json& j);

/// One compact JSON object terminated by '\n'.
std::string to_jsonl_line(const IntelRecord& rec);
std::string to_jsonl_line(const AggregatedIntel& agg);

std::vector<IntelRecord> read_records_jsonl(const std::string& path);
void append_records_jsonl(const std::string& path, const std::vector<IntelRecord>& records);

}  // namespace pkgintel
