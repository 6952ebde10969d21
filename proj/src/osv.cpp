#include "pkgintel/store.hpp"

#include <algorithm>

#include "pkgintel/http.hpp"
#include "pkgintel/strings.hpp"

namespace pkgintel {

namespace {

const char* kSchemaVersion = "1.6.0";

std::string day_stamp(const FlexDate& d) { return d.to_iso() + "T00:00:00Z"; }

Json opt(const OptString& s) { return s ? Json(*s) : Json(nullptr); }

OptString opt_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace

std::string advisory_id(const AggregatedIntel& agg) {
    return "PKGINTEL-" + str::to_upper(to_string(agg.ecosystem)) + "-" +
           sha256_hex(normalize_name(agg.name, agg.ecosystem)).substr(0, 12);
}

Json to_osv(const AggregatedIntel& agg) {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["id"] = advisory_id(agg);
    doc["summary"] = "Malicious code in " + agg.name + " (" + osv_ecosystem_name(agg.ecosystem) + ")";
    Timestamp latest;
    for (const auto& p : agg.provenance) latest = std::max(latest, p.collected_at);
    if (agg.discovery_date) {
        doc["published"] = day_stamp(*agg.discovery_date);
        doc["modified"] = day_stamp(*agg.discovery_date);
    } else {
        doc["modified"] = latest.to_iso();
    }
    Json affected;
    affected["package"] = {{"ecosystem", osv_ecosystem_name(agg.ecosystem)}, {"name", agg.name}};
    if (agg.versions) affected["versions"] = Json(std::vector<std::string>(agg.versions->begin(), agg.versions->end()));
    doc["affected"] = Json::array({affected});
    if (agg.repo_url) doc["references"] = Json::array({{{"type", "PACKAGE"}, {"url", *agg.repo_url}}});

    Json prov = Json::array();
    for (const auto& p : agg.provenance)
        prov.push_back({{"source_id", p.source_id}, {"page_url", p.page_url}, {"collected_at", p.collected_at.to_iso()}});
    doc["database_specific"] = {
        {"attack_method", opt(agg.attack_method)},
        {"discoverer", opt(agg.discoverer)},
        {"impacted_systems", opt(agg.impacted_systems)},
        {"attack_vector", opt(agg.attack_vector)},
        {"iocs", Json(std::vector<std::string>(agg.iocs.begin(), agg.iocs.end()))},
        {"provenance", prov},
        {"confirmation_count", agg.confirmation_count},
    };
    return doc;
}

AggregatedIntel from_osv(const Json& doc) {
    try {
        AggregatedIntel agg;
        const auto& affected = doc.at("affected").at(0);
        const auto& pkg = affected.at("package");
        agg.ecosystem = parse_ecosystem(pkg.at("ecosystem").get<std::string>());
        agg.name = normalize_name(pkg.at("name").get<std::string>(), agg.ecosystem);
        if (affected.contains("versions")) {
            VersionSet v;
            for (const auto& x : affected.at("versions")) v.insert(x.get<std::string>());
            agg.versions = std::move(v);
        }
        if (doc.contains("published")) agg.discovery_date = parse_flexible_date(doc.at("published").get<std::string>().substr(0, 10));
        if (doc.contains("references"))
            for (const auto& r : doc.at("references"))
                if (r.value("type", "") == "PACKAGE") {
                    agg.repo_url = r.at("url").get<std::string>();
                    break;
                }
        const auto& ds = doc.at("database_specific");
        agg.attack_method = opt_from(ds, "attack_method");
        agg.discoverer = opt_from(ds, "discoverer");
        agg.impacted_systems = opt_from(ds, "impacted_systems");
        agg.attack_vector = opt_from(ds, "attack_vector");
        for (const auto& c : ds.at("iocs")) agg.iocs.insert(c.get<std::string>());
        for (const auto& p : ds.at("provenance"))
            agg.provenance.push_back({p.at("source_id").get<std::string>(), p.at("page_url").get<std::string>(),
                                      Timestamp::parse_iso(p.at("collected_at").get<std::string>())});
        std::sort(agg.provenance.begin(), agg.provenance.end());
        agg.confirmation_count = ds.at("confirmation_count").get<int>();
        if (doc.value("id", "") != advisory_id(agg))
            throw Error(ErrorKind::Parse, "advisory id does not match its package: " + doc.value("id", "?"));
        return agg;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed advisory: ") + e.what());
    }
}

std::string osv_text(const AggregatedIntel& agg) { return to_osv(agg).dump(2) + "\n"; }

std::size_t export_osv(const IntelStore& store, const std::filesystem::path& out) {
    std::size_t n = 0;
    for (const auto& agg : store.all()) {
        auto dir = out / osv_ecosystem_name(agg.ecosystem);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
        write_file_atomic(dir / (advisory_id(agg) + ".json"), osv_text(agg));
        ++n;
    }
    return n;
}

std::vector<AggregatedIntel> import_osv(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::exists(dir)) throw Error(ErrorKind::Io, "no such directory: " + dir.string());
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<AggregatedIntel> out;
    for (const auto& f : files) {
        auto j = Json::parse(read_file(f), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorKind::Parse, "not JSON: " + f.string());
        try {
            out.push_back(from_osv(j));
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, f.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace pkgintel
