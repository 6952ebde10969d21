#include "pkgintel/entities.hpp"

#include <algorithm>

#include "pkgintel/strings.hpp"

namespace pkgintel {

const std::array<EntityKind, kEntityKindCount>& all_entity_kinds() {
    static const std::array<EntityKind, kEntityKindCount> kinds = {
        EntityKind::PackageName,  EntityKind::Version,         EntityKind::DiscoveryDate,
        EntityKind::RepositoryUrl, EntityKind::AttackMethod,   EntityKind::Discoverer,
        EntityKind::ImpactedSystems, EntityKind::AttackVector, EntityKind::Ioc,
    };
    return kinds;
}

std::string to_string(EntityKind kind) {
    switch (kind) {
        case EntityKind::PackageName: return "package_name";
        case EntityKind::Version: return "version";
        case EntityKind::DiscoveryDate: return "discovery_date";
        case EntityKind::RepositoryUrl: return "repository_url";
        case EntityKind::AttackMethod: return "attack_method";
        case EntityKind::Discoverer: return "discoverer";
        case EntityKind::ImpactedSystems: return "impacted_systems";
        case EntityKind::AttackVector: return "attack_vector";
        case EntityKind::Ioc: return "ioc";
    }
    return "?";
}

std::optional<EntityKind> parse_entity_kind(std::string_view key) {
    for (auto k : all_entity_kinds())
        if (to_string(k) == key) return k;
    return std::nullopt;
}

bool EntitySet::add(EntityKind kind, std::string_view value) {
    auto v = std::string(str::trim(value));
    if (v.empty()) return false;
    auto& list = values_[index(kind)];
    if (std::find(list.begin(), list.end(), v) != list.end()) return false;
    list.push_back(std::move(v));
    return true;
}

void EntitySet::set(EntityKind kind, std::vector<std::string> values) {
    values_[index(kind)].clear();
    for (const auto& v : values) add(kind, v);
}

bool EntitySet::empty() const {
    return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.empty(); });
}

OrderedJson to_json(const EntitySet& e) {
    OrderedJson j = OrderedJson::object();
    for (auto k : all_entity_kinds()) j[to_string(k)] = e.values(k);
    return j;
}

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorKind::Schema, what); }

std::vector<std::string> string_list(const Json& v, const std::string& key) {
    std::vector<std::string> out;
    if (v.is_null()) return out;
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
        return out;
    }
    if (!v.is_array()) schema_error("'" + key + "' must be an array of strings");
    for (const auto& item : v) {
        if (!item.is_string()) schema_error("'" + key + "' must contain only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

OptString opt_string(const Json& v, const std::string& key) {
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) schema_error("'" + key + "' must be a string or null");
    const auto& raw = v.get_ref<const std::string&>();
    auto t = str::trim(raw);
    if (t.empty()) return std::nullopt;
    return std::string(t);
}

const char* const kDraftKeys[] = {"package_name", "version",          "discovery_date", "repository_url",
                                  "attack_method", "discoverer",      "impacted_systems", "attack_vector",
                                  "ioc",           "ecosystem"};

}  // namespace

EntitySet entity_set_from_json(const Json& j) {
    if (!j.is_object()) schema_error("entity set must be a JSON object");
    EntitySet e;
    for (const auto& [key, value] : j.items()) {
        auto kind = parse_entity_kind(key);
        if (!kind) schema_error("unknown entity kind '" + key + "'");
        for (const auto& v : string_list(value, key)) e.add(*kind, v);
    }
    return e;
}

OrderedJson to_json(const RecordDraft& d) {
    auto opt = [](const OptString& s) { return s ? OrderedJson(*s) : OrderedJson(nullptr); };
    OrderedJson j;
    j["package_name"] = d.package_name;
    j["version"] = d.version;
    j["discovery_date"] = opt(d.discovery_date);
    j["repository_url"] = opt(d.repository_url);
    j["attack_method"] = opt(d.attack_method);
    j["discoverer"] = opt(d.discoverer);
    j["impacted_systems"] = opt(d.impacted_systems);
    j["attack_vector"] = opt(d.attack_vector);
    j["ioc"] = d.ioc;
    j["ecosystem"] = opt(d.ecosystem);
    return j;
}

OrderedJson drafts_to_json(const std::vector<RecordDraft>& drafts) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& d : drafts) arr.push_back(to_json(d));
    OrderedJson j;
    j["packages"] = std::move(arr);
    return j;
}

std::vector<RecordDraft> drafts_from_json(const Json& j) {
    const Json* list = &j;
    if (j.is_object()) {
        if (!j.contains("packages")) schema_error("draft document lacks 'packages'");
        if (j.size() != 1) schema_error("draft document has keys besides 'packages'");
        list = &j.at("packages");
    }
    if (!list->is_array()) schema_error("'packages' must be an array");
    std::vector<RecordDraft> out;
    for (const auto& item : *list) {
        if (!item.is_object()) schema_error("each package entry must be an object");
        for (const auto& [key, _] : item.items())
            if (std::find(std::begin(kDraftKeys), std::end(kDraftKeys), key) == std::end(kDraftKeys))
                schema_error("unknown draft field '" + key + "'");
        RecordDraft d;
        if (!item.contains("package_name") || !item.at("package_name").is_string())
            schema_error("package entry without string package_name");
        d.package_name = std::string(str::trim(item.at("package_name").get<std::string>()));
        if (d.package_name.empty()) schema_error("blank package_name");
        auto get = [&](const char* key) -> const Json& {
            static const Json null_value;
            return item.contains(key) ? item.at(key) : null_value;
        };
        for (auto& v : string_list(get("version"), "version")) {
            auto t = std::string(str::trim(v));
            if (!t.empty() && std::find(d.version.begin(), d.version.end(), t) == d.version.end())
                d.version.push_back(std::move(t));
        }
        d.discovery_date = opt_string(get("discovery_date"), "discovery_date");
        d.repository_url = opt_string(get("repository_url"), "repository_url");
        d.attack_method = opt_string(get("attack_method"), "attack_method");
        d.discoverer = opt_string(get("discoverer"), "discoverer");
        d.impacted_systems = opt_string(get("impacted_systems"), "impacted_systems");
        d.attack_vector = opt_string(get("attack_vector"), "attack_vector");
        for (auto& v : string_list(get("ioc"), "ioc")) {
            auto t = std::string(str::trim(v));
            if (!t.empty() && std::find(d.ioc.begin(), d.ioc.end(), t) == d.ioc.end()) d.ioc.push_back(std::move(t));
        }
        d.ecosystem = opt_string(get("ecosystem"), "ecosystem");
        if (d.ecosystem) {
            try {
                d.ecosystem = to_string(parse_ecosystem(*d.ecosystem));
            } catch (const Error&) {
                schema_error("unknown ecosystem '" + *d.ecosystem + "'");
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

Json parse_reply_json(std::string_view reply) {
    std::string_view body = str::trim(reply);
    if (auto fence = body.find("```"); fence != std::string_view::npos) {
        auto start = body.find('\n', fence);
        auto end = start == std::string_view::npos ? std::string_view::npos : body.find("```", start);
        if (end != std::string_view::npos) body = str::trim(body.substr(start + 1, end - start - 1));
    }
    auto parsed = Json::parse(body.begin(), body.end(), nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    // Prose around the payload: take the outermost braces.
    auto open = body.find('{');
    auto close = body.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        auto inner = body.substr(open, close - open + 1);
        parsed = Json::parse(inner.begin(), inner.end(), nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    throw Error(ErrorKind::Schema, "reply is not valid JSON");
}

}  // namespace pkgintel
