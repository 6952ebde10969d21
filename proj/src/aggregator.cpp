#include "pkgintel/aggregator.hpp"

#include <future>
#include <set>

namespace pkgintel {

namespace {

template <typename T, typename Get>
std::optional<T> vote(const std::vector<IntelRecord>& records, Get get) {
    std::vector<Ballot<T>> ballots;
    ballots.reserve(records.size());
    for (const auto& r : records) ballots.push_back({get(r), r.collected_at});
    return vote_field(ballots).winner;
}

}  // namespace

AggregatedIntel aggregate_group(const std::vector<IntelRecord>& records) {
    if (records.empty()) throw Error(ErrorKind::InvalidArgument, "aggregate_group: empty group");
    AggregatedIntel agg;
    agg.ecosystem = records.front().ecosystem;
    agg.name = normalize_name(records.front().name, agg.ecosystem);
    for (const auto& r : records) {
        if (r.ecosystem != agg.ecosystem || normalize_name(r.name, r.ecosystem) != agg.name)
            throw Error(ErrorKind::InvalidArgument, "aggregate_group: mixed keys (" + agg.name + ", " + r.name + ")");
    }
    agg.versions = vote<VersionSet>(records, [](const IntelRecord& r) { return r.versions; });
    agg.repo_url = vote<std::string>(records, [](const IntelRecord& r) { return r.repo_url; });
    agg.attack_method = vote<std::string>(records, [](const IntelRecord& r) { return r.attack_method; });
    agg.discoverer = vote<std::string>(records, [](const IntelRecord& r) { return r.discoverer; });
    agg.impacted_systems = vote<std::string>(records, [](const IntelRecord& r) { return r.impacted_systems; });
    agg.attack_vector = vote<std::string>(records, [](const IntelRecord& r) { return r.attack_vector; });
    std::set<std::string> sources;
    for (const auto& r : records) {
        if (r.discovery_date && (!agg.discovery_date || *r.discovery_date < *agg.discovery_date))
            agg.discovery_date = r.discovery_date;
        agg.iocs.insert(r.iocs.begin(), r.iocs.end());
        agg.provenance.push_back({r.source_id, r.page_url, r.collected_at});
        sources.insert(r.source_id);
    }
    std::sort(agg.provenance.begin(), agg.provenance.end());
    agg.confirmation_count = static_cast<int>(sources.size());
    return agg;
}

std::vector<AggregatedIntel> aggregate_all(const std::vector<IntelRecord>& records, std::vector<GroupError>* errors,
                                           std::size_t parallelism) {
    std::map<std::pair<Ecosystem, std::string>, std::vector<IntelRecord>> groups;
    for (const auto& r : records) {
        std::string key;
        try {
            key = normalize_name(r.name, r.ecosystem);
        } catch (const Error& e) {
            if (errors) errors->push_back({r.ecosystem, r.name, e.what()});
            continue;
        }
        groups[{r.ecosystem, key}].push_back(r);
    }
    std::vector<const std::pair<const std::pair<Ecosystem, std::string>, std::vector<IntelRecord>>*> order;
    for (const auto& g : groups) order.push_back(&g);

    std::vector<std::optional<AggregatedIntel>> results(order.size());
    std::vector<std::string> failures(order.size());
    auto work = [&](std::size_t i) {
        try {
            results[i] = aggregate_group(order[i]->second);
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    };
    if (parallelism <= 1 || order.size() < 2) {
        for (std::size_t i = 0; i < order.size(); ++i) work(i);
    } else {
        std::vector<std::future<void>> pending;
        for (std::size_t t = 0; t < parallelism; ++t)
            pending.push_back(std::async(std::launch::async, [&, t] {
                for (std::size_t i = t; i < order.size(); i += parallelism) work(i);
            }));
        for (auto& f : pending) f.get();
    }

    std::vector<AggregatedIntel> out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (results[i]) out.push_back(std::move(*results[i]));
        else if (errors) errors->push_back({order[i]->first.first, order[i]->first.second, failures[i]});
    }
    return out;
}

namespace {

IntelRecord voted_fields(const AggregatedIntel& agg) {
    IntelRecord r;
    r.name = agg.name;
    r.ecosystem = agg.ecosystem;
    r.versions = agg.versions;
    r.discovery_date = agg.discovery_date;
    r.repo_url = agg.repo_url;
    r.attack_method = agg.attack_method;
    r.discoverer = agg.discoverer;
    r.impacted_systems = agg.impacted_systems;
    r.attack_vector = agg.attack_vector;
    r.iocs = agg.iocs;
    return r;
}

}  // namespace

IntelRecord project_to_record(const AggregatedIntel& agg) {
    auto r = voted_fields(agg);
    if (!agg.provenance.empty()) {
        auto latest = std::max_element(agg.provenance.begin(), agg.provenance.end(),
                                       [](const Provenance& a, const Provenance& b) {
                                           return a.collected_at < b.collected_at;
                                       });
        r.source_id = latest->source_id;
        r.page_url = latest->page_url;
        r.collected_at = latest->collected_at;
    }
    return r;
}

std::vector<IntelRecord> project_to_records(const AggregatedIntel& agg) {
    std::vector<IntelRecord> out;
    for (const auto& p : agg.provenance) {
        auto r = voted_fields(agg);
        r.source_id = p.source_id;
        r.page_url = p.page_url;
        r.collected_at = p.collected_at;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace pkgintel
