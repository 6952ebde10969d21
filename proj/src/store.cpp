#include "pkgintel/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <set>
#include <sstream>

#include "pkgintel/csv.hpp"
#include "pkgintel/http.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"

namespace pkgintel {

DateRange parse_date_range(std::string_view text) {
    auto sep = text.find("..");
    if (sep == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument, "date range must look like FROM..TO: " + std::string(text));
    auto from = try_parse_flexible_date(str::trim(text.substr(0, sep)));
    auto to = try_parse_flexible_date(str::trim(text.substr(sep + 2)));
    if (!from || !to) throw Error(ErrorKind::InvalidArgument, "unparseable date range: " + std::string(text));
    if (*to < *from) throw Error(ErrorKind::InvalidArgument, "date range ends before it starts: " + std::string(text));
    return {*from, *to};
}

namespace {

const char* kLogFile = "records.jsonl";
const char* kSnapshotFile = "snapshot.json";

bool same_origin(const IntelRecord& a, const IntelRecord& b) {
    return a.source_id == b.source_id && a.page_url == b.page_url && a.collected_at == b.collected_at;
}

}  // namespace

IntelStore IntelStore::open(const std::filesystem::path& dir) {
    IntelStore store;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create store directory " + dir.string() + ": " + ec.message());
    const auto log_path = dir / kLogFile;
    if (std::filesystem::exists(log_path)) {
        std::set<StoreKey> touched;
        for (auto& r : read_records_jsonl(log_path.string())) {
            StoreKey key{r.ecosystem, r.name};
            if (store.add_basis(r)) {
                store.log_.push_back(std::move(r));
                touched.insert(key);
            }
        }
        for (const auto& k : touched) store.rebuild(k);
    } else if (std::filesystem::exists(dir / kSnapshotFile)) {
        auto j = Json::parse(read_file(dir / kSnapshotFile), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorKind::Parse, "corrupt snapshot in " + dir.string());
        store.dir_ = dir;  // set first so upsert appends the replayed basis to a fresh log
        for (const auto& a : j.at("packages")) store.upsert(aggregate_from_json(a));
        return store;
    }
    store.dir_ = dir;
    return store;
}

bool IntelStore::add_basis(const IntelRecord& rec) {
    auto& list = basis_[{rec.ecosystem, rec.name}];
    for (const auto& r : list)
        if (same_origin(r, rec)) return false;
    list.push_back(rec);
    return true;
}

void IntelStore::rebuild(const StoreKey& key) {
    auto it = basis_.find(key);
    if (it == basis_.end() || it->second.empty()) {
        aggregates_.erase(key);
        return;
    }
    aggregates_[key] = aggregate_group(it->second);
}

std::size_t IntelStore::ingest(const std::vector<IntelRecord>& records) {
    std::vector<IntelRecord> fresh;
    std::set<StoreKey> touched;
    for (auto r : records) {
        validate(r);
        if (!add_basis(r)) continue;
        touched.insert({r.ecosystem, r.name});
        fresh.push_back(std::move(r));
    }
    if (dir_ && !fresh.empty()) append_records_jsonl((*dir_ / kLogFile).string(), fresh);
    log_.insert(log_.end(), fresh.begin(), fresh.end());
    for (const auto& k : touched) rebuild(k);
    return fresh.size();
}

void IntelStore::upsert(const AggregatedIntel& agg) {
    AggregatedIntel canon = agg;
    canon.name = normalize_name(agg.name, agg.ecosystem);
    if (canon.provenance.empty())
        throw Error(ErrorKind::InvalidArgument, "upsert: aggregate " + canon.name + " has no provenance");
    std::vector<IntelRecord> fresh;
    for (auto& r : project_to_records(canon))
        if (add_basis(r)) fresh.push_back(std::move(r));
    if (fresh.empty()) return;
    if (dir_) append_records_jsonl((*dir_ / kLogFile).string(), fresh);
    log_.insert(log_.end(), fresh.begin(), fresh.end());
    rebuild({canon.ecosystem, canon.name});
}

std::vector<AggregatedIntel> IntelStore::query(const QueryFilter& f) const {
    std::optional<std::string> name;
    std::vector<AggregatedIntel> out;
    for (const auto& [key, agg] : aggregates_) {
        if (f.ecosystem && key.first != *f.ecosystem) continue;
        if (f.name) {
            std::string want;
            try {
                want = normalize_name(*f.name, key.first);
            } catch (const Error&) {
                throw Error(ErrorKind::InvalidArgument, "query: blank name filter");
            }
            if (key.second != want) continue;
        }
        if (f.date_range) {
            if (!agg.discovery_date) continue;
            if (*agg.discovery_date < f.date_range->from || f.date_range->to < *agg.discovery_date) continue;
        }
        if (f.source_id) {
            bool hit = false;
            for (const auto& p : agg.provenance) hit = hit || p.source_id == *f.source_id;
            if (!hit) continue;
        }
        out.push_back(agg);
    }
    return out;
}

const AggregatedIntel* IntelStore::find(Ecosystem eco, const std::string& name) const {
    auto it = aggregates_.find({eco, normalize_name(name, eco)});
    return it == aggregates_.end() ? nullptr : &it->second;
}

std::vector<AggregatedIntel> IntelStore::all() const {
    std::vector<AggregatedIntel> out;
    for (const auto& [_, a] : aggregates_) out.push_back(a);
    return out;
}

std::vector<IntelRecord> IntelStore::log() const { return log_; }

StoreMeta IntelStore::meta() const {
    StoreMeta m;
    std::set<std::string> sources;
    for (const auto& [_, a] : aggregates_)
        for (const auto& p : a.provenance) {
            sources.insert(p.source_id);
            if (m.created_at < p.collected_at) m.created_at = p.collected_at;
        }
    m.record_count = aggregates_.size();
    m.source_count = sources.size();
    m.log_records = log_.size();
    return m;
}

OrderedJson IntelStore::snapshot_json() const {
    auto m = meta();
    OrderedJson j;
    j["metadata"] = {{"created_at", m.created_at.to_iso()},
                     {"record_count", m.record_count},
                     {"source_count", m.source_count},
                     {"log_records", m.log_records}};
    OrderedJson packages = OrderedJson::array();
    for (const auto& [_, a] : aggregates_) packages.push_back(to_json(a));
    j["packages"] = std::move(packages);
    return j;
}

void IntelStore::save_snapshot() const {
    if (!dir_) return;
    write_file_atomic(*dir_ / kSnapshotFile, snapshot_json().dump(2) + "\n");
}

StoreLock::StoreLock(const std::filesystem::path& store_dir) : path_(store_dir / "store.lock") {
    std::error_code ec;
    std::filesystem::create_directories(store_dir, ec);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error(ErrorKind::Lock, "store is locked by another writer (" + path_.string() +
                                             "); remove it if no writer is running");
        throw Error(ErrorKind::Io, "cannot create " + path_.string() + ": " + std::strerror(errno));
    }
    auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

StoreLock::~StoreLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

// ---- timeliness

std::vector<ExternalFeedEntry> parse_feed_csv(std::string_view text) {
    auto rows = csv::parse(text);
    if (rows.empty()) throw Error(ErrorKind::Parse, "feed is empty");
    const std::vector<std::string> header = {"ecosystem", "name", "recorded_date", "feed_label"};
    std::vector<std::string> got;
    for (const auto& h : rows[0]) got.push_back(str::to_lower(str::trim(h)));
    if (got != header) throw Error(ErrorKind::Parse, "feed header must be ecosystem,name,recorded_date,feed_label");
    std::vector<ExternalFeedEntry> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = "feed row " + std::to_string(i + 1);
        if (r.size() != 4) throw Error(ErrorKind::Parse, where + ": expected 4 fields");
        ExternalFeedEntry e;
        try {
            e.ecosystem = parse_ecosystem(r[0]);
            e.name = normalize_name(r[1], e.ecosystem);
            e.recorded_date = parse_flexible_date(r[2]);
        } catch (const Error& err) {
            throw Error(ErrorKind::Parse, where + ": " + err.what());
        }
        e.feed_label = std::string(str::trim(r[3]));
        if (e.feed_label.empty()) throw Error(ErrorKind::Parse, where + ": blank feed_label");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ExternalFeedEntry> read_feed_csv(const std::filesystem::path& path) { return parse_feed_csv(read_file(path)); }

std::string gap_bucket(std::int64_t gap) {
    if (gap < 0) return "<0";
    if (gap == 0) return "0";
    if (gap <= 7) return "1-7";
    if (gap <= 30) return "8-30";
    if (gap <= 90) return "31-90";
    if (gap <= 365) return "91-365";
    return ">365";
}

TimelinessReport timeliness_report(const IntelStore& store, const std::vector<ExternalFeedEntry>& feed) {
    TimelinessReport rep;
    for (const char* b : {"<0", "0", "1-7", "8-30", "31-90", "91-365", ">365"}) rep.histogram[b] = 0;
    for (const auto& e : feed) {
        const auto* agg = store.find(e.ecosystem, e.name);
        if (!agg) {
            rep.missing.push_back(e);
            continue;
        }
        if (!agg->discovery_date) {
            rep.undated.push_back(e);
            continue;
        }
        GapRow row{e.ecosystem, agg->name, e.feed_label, *agg->discovery_date, e.recorded_date,
                   days_between(*agg->discovery_date, e.recorded_date)};
        if (row.gap > 0) ++rep.earlier;
        else if (row.gap == 0) ++rep.same;
        else ++rep.later;
        ++rep.histogram[gap_bucket(row.gap)];
        rep.rows.push_back(std::move(row));
    }
    std::sort(rep.rows.begin(), rep.rows.end(), [](const GapRow& a, const GapRow& b) {
        return std::tie(a.ecosystem, a.name, a.feed_label) < std::tie(b.ecosystem, b.name, b.feed_label);
    });
    return rep;
}

namespace {

std::string signed_gap(std::int64_t g) { return (g >= 0 ? "+" : "") + std::to_string(g); }

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

}  // namespace

std::string render_timeliness(const TimelinessReport& rep) {
    std::size_t w = 7;
    for (const auto& r : rep.rows) w = std::max(w, r.name.size());
    std::ostringstream out;
    out << pad("package", w) << "  ecosystem  ours      feed          recorded  gap\n";
    for (const auto& r : rep.rows)
        out << pad(r.name, w) << "  " << pad(to_string(r.ecosystem), 9) << "  " << r.ours.to_short() << "  "
            << pad(r.feed_label, 12) << "  " << r.theirs.to_short() << "  (" << signed_gap(r.gap) << ")\n";
    out << "\nearlier " << rep.earlier << ", same " << rep.same << ", later " << rep.later << "\n";
    for (const char* b : {"<0", "0", "1-7", "8-30", "31-90", "91-365", ">365"})
        out << "  " << pad(b, 6) << " " << rep.histogram.at(b) << "\n";
    if (!rep.missing.empty()) {
        out << "not in store:";
        for (const auto& m : rep.missing) out << ' ' << m.name << " (" << m.feed_label << ")";
        out << "\n";
    }
    if (!rep.undated.empty()) {
        out << "no discovery date:";
        for (const auto& m : rep.undated) out << ' ' << m.name << " (" << m.feed_label << ")";
        out << "\n";
    }
    return out.str();
}

OrderedJson to_json(const TimelinessReport& rep) {
    OrderedJson j;
    OrderedJson rows = OrderedJson::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"ecosystem", to_string(r.ecosystem)},
                        {"name", r.name},
                        {"feed_label", r.feed_label},
                        {"ours", r.ours.to_iso()},
                        {"theirs", r.theirs.to_iso()},
                        {"gap", r.gap}});
    j["rows"] = std::move(rows);
    j["summary"] = {{"earlier", rep.earlier}, {"same", rep.same}, {"later", rep.later}};
    OrderedJson hist = OrderedJson::object();
    for (const char* b : {"<0", "0", "1-7", "8-30", "31-90", "91-365", ">365"}) hist[b] = rep.histogram.at(b);
    j["histogram"] = std::move(hist);
    auto names = [](const std::vector<ExternalFeedEntry>& v) {
        OrderedJson a = OrderedJson::array();
        for (const auto& e : v) a.push_back({{"ecosystem", to_string(e.ecosystem)}, {"name", e.name}, {"feed_label", e.feed_label}});
        return a;
    };
    j["missing"] = names(rep.missing);
    j["undated"] = names(rep.undated);
    return j;
}

}  // namespace pkgintel
