#pragma once

// Standardize, group by (ecosystem, name), vote field by field.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pkgintel/core.hpp"

namespace pkgintel {

template <typename T>
struct Ballot {
    std::optional<T> value;  // nullopt = NaN
    Timestamp t;
};

template <typename T>
struct VoteOutcome {
    std::optional<T> winner;
    std::map<T, int> counts;
    bool tie_broken_by_timestamp = false;
};

/// NaN ballots are ignored; all-NaN (or no ballots) gives NaN. The most frequent
/// value wins. On a count tie the tied value whose ballot carries the largest
/// timestamp wins; if that is also tied, the smallest value wins.
template <typename T>
VoteOutcome<T> vote_field(const std::vector<Ballot<T>>& ballots) {
    VoteOutcome<T> out;
    std::map<T, Timestamp> latest;
    for (const auto& b : ballots) {
        if (!b.value) continue;
        ++out.counts[*b.value];
        auto [it, inserted] = latest.emplace(*b.value, b.t);
        if (!inserted && it->second < b.t) it->second = b.t;
    }
    if (out.counts.empty()) return out;
    int best = 0;
    for (const auto& [_, c] : out.counts) best = std::max(best, c);
    int tied = 0;
    for (const auto& [value, c] : out.counts) {
        if (c != best) continue;
        ++tied;
        // map order is ascending, so a strictly later timestamp is needed to displace.
        if (!out.winner || latest.at(*out.winner) < latest.at(value)) out.winner = value;
    }
    out.tie_broken_by_timestamp = tied >= 2;
    return out;
}

/// Throws Error(InvalidArgument) for an empty group or one mixing names/ecosystems.
AggregatedIntel aggregate_group(const std::vector<IntelRecord>& records);

struct GroupError {
    Ecosystem ecosystem;
    std::string name;
    std::string message;
};

/// One aggregate per (ecosystem, normalized name), sorted by that key. Failing
/// groups are reported in `errors` (when given) without stopping the others.
std::vector<AggregatedIntel> aggregate_all(const std::vector<IntelRecord>& records,
                                           std::vector<GroupError>* errors = nullptr, std::size_t parallelism = 1);

/// A single record carrying the voted fields; latest provenance entry as its origin.
IntelRecord project_to_record(const AggregatedIntel& agg);
/// One record per provenance entry, each carrying the voted fields.
std::vector<IntelRecord> project_to_records(const AggregatedIntel& agg);

}  // namespace pkgintel
