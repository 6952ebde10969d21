#pragma once

// Append-log backed intelligence store, its derived snapshot, queries, OSV
// interchange and timeliness comparison against external feeds.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pkgintel/aggregator.hpp"
#include "pkgintel/core.hpp"

namespace pkgintel {

struct StoreMeta {
    Timestamp created_at;  // latest collection time in the store, so snapshots are reproducible
    std::size_t record_count = 0;  // aggregated packages
    std::size_t source_count = 0;  // distinct source ids over all provenance
    std::size_t log_records = 0;   // basis records in the append log

    bool operator==(const StoreMeta&) const = default;
};

struct DateRange {
    FlexDate from;
    FlexDate to;  // inclusive
};

/// "2022-10-01..2022-10-31" (either side in any accepted date notation).
/// Throws Error(InvalidArgument) when malformed or reversed.
DateRange parse_date_range(std::string_view text);

struct QueryFilter {
    std::optional<Ecosystem> ecosystem;
    std::optional<std::string> name;
    std::optional<DateRange> date_range;  // on the discovery date; NaN dates never match
    std::optional<std::string> source_id;
};

using StoreKey = std::pair<Ecosystem, std::string>;

class IntelStore {
public:
    /// In-memory store.
    IntelStore() = default;
    /// Replays `<dir>/records.jsonl`; falls back to `<dir>/snapshot.json` when there is no log.
    static IntelStore open(const std::filesystem::path& dir);

    const std::optional<std::filesystem::path>& dir() const { return dir_; }

    /// Appends records not yet in the log (same name, source, page and collection time)
    /// and re-aggregates the affected keys. Returns the number appended.
    std::size_t ingest(const std::vector<IntelRecord>& records);
    /// Merges an aggregate by its provenance: entries already present are kept as they
    /// are; new ones join as records carrying the aggregate's voted fields.
    void upsert(const AggregatedIntel& agg);

    std::vector<AggregatedIntel> query(const QueryFilter& filter) const;
    const AggregatedIntel* find(Ecosystem eco, const std::string& name) const;
    std::vector<AggregatedIntel> all() const;
    std::size_t size() const { return aggregates_.size(); }
    StoreMeta meta() const;
    std::vector<IntelRecord> log() const;

    /// Writes snapshot.json (atomically). No-op for in-memory stores.
    void save_snapshot() const;
    OrderedJson snapshot_json() const;

private:
    bool add_basis(const IntelRecord& rec);
    void rebuild(const StoreKey& key);

    std::optional<std::filesystem::path> dir_;
    std::map<StoreKey, std::vector<IntelRecord>> basis_;
    std::map<StoreKey, AggregatedIntel> aggregates_;
    std::vector<IntelRecord> log_;
};

/// Holds `<dir>/store.lock` (created exclusively) for the writer's lifetime.
class StoreLock {
public:
    explicit StoreLock(const std::filesystem::path& store_dir);
    ~StoreLock();
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    std::filesystem::path path_;
};

// ---- OSV interchange

/// PKGINTEL-<PYPI|NPM>-<first 12 hex digits of sha256(normalized name)>
std::string advisory_id(const AggregatedIntel& agg);
/// Canonical advisory document (keys sorted).
Json to_osv(const AggregatedIntel& agg);
AggregatedIntel from_osv(const Json& advisory);
/// Sorted keys, two-space indent, trailing LF.
std::string osv_text(const AggregatedIntel& agg);

/// Writes `<out>/<osv ecosystem>/<id>.json` per aggregate (temp file then rename).
/// Returns the number written. Throws Error(Io).
std::size_t export_osv(const IntelStore& store, const std::filesystem::path& out);
/// Reads every advisory under `dir` (recursively, path order). Throws Error(Parse).
std::vector<AggregatedIntel> import_osv(const std::filesystem::path& dir);

// ---- timeliness

struct ExternalFeedEntry {
    Ecosystem ecosystem = Ecosystem::PyPI;
    std::string name;
    FlexDate recorded_date;
    std::string feed_label;
};

/// CSV with header `ecosystem,name,recorded_date,feed_label`. Throws Error(Parse).
std::vector<ExternalFeedEntry> parse_feed_csv(std::string_view text);
std::vector<ExternalFeedEntry> read_feed_csv(const std::filesystem::path& path);

struct GapRow {
    Ecosystem ecosystem = Ecosystem::PyPI;
    std::string name;
    std::string feed_label;
    FlexDate ours;
    FlexDate theirs;
    std::int64_t gap = 0;  // positive: our record is earlier
};

struct TimelinessReport {
    std::vector<GapRow> rows;  // sorted by (ecosystem, name, feed_label)
    std::size_t earlier = 0;
    std::size_t same = 0;
    std::size_t later = 0;
    std::map<std::string, std::size_t> histogram;
    std::vector<ExternalFeedEntry> missing;  // feed names the store lacks
    std::vector<ExternalFeedEntry> undated;  // present, but our discovery date is NaN
};

/// Histogram bucket label for a gap.
std::string gap_bucket(std::int64_t gap);
TimelinessReport timeliness_report(const IntelStore& store, const std::vector<ExternalFeedEntry>& feed);
std::string render_timeliness(const TimelinessReport& report);
OrderedJson to_json(const TimelinessReport& report);

}  // namespace pkgintel
