#include "pkgintel/core.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "pkgintel/strings.hpp"

namespace pkgintel {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidName: return "invalid-name";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Throttle: return "throttle";
        case ErrorKind::PermanentFetch: return "permanent-fetch";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::ExtractionFailed: return "extraction-failed";
        case ErrorKind::Io: return "io";
        case ErrorKind::Lock: return "lock";
    }
    return "unknown";
}

std::string to_string(Ecosystem eco) {
    return eco == Ecosystem::PyPI ? "PyPI" : "NPM";
}

Ecosystem parse_ecosystem(std::string_view text) {
    auto t = str::trim(text);
    if (str::iequals(t, "pypi")) return Ecosystem::PyPI;
    if (str::iequals(t, "npm")) return Ecosystem::NPM;
    throw Error(ErrorKind::Parse, "unknown ecosystem: " + std::string(text));
}

std::string osv_ecosystem_name(Ecosystem eco) {
    return eco == Ecosystem::PyPI ? "PyPI" : "npm";
}

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return (m == 2 && is_leap(y)) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

// Proleptic Gregorian day count (Hinnant's days_from_civil).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (!str::is_digit(c)) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

constexpr std::array<std::string_view, 12> kMonthNames{
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december"};

int month_from_name(std::string_view word) {
    auto w = str::to_lower(word);
    if (!w.empty() && w.back() == '.') w.pop_back();
    for (std::size_t i = 0; i < kMonthNames.size(); ++i) {
        if (w == kMonthNames[i]) return static_cast<int>(i) + 1;
        if (w.size() >= 3 && kMonthNames[i].substr(0, w.size()) == w) return static_cast<int>(i) + 1;
    }
    return 0;
}

std::optional<FlexDate> make_date(int y, int m, int d) {
    if (!FlexDate::valid(y, m, d)) return std::nullopt;
    return FlexDate{y, m, d};
}

}  // namespace

bool FlexDate::valid(int year, int month, int day) {
    return year >= 1 && year <= 9999 && month >= 1 && month <= 12 && day >= 1 &&
           day <= days_in_month(year, month);
}

FlexDate FlexDate::from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return FlexDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::int64_t FlexDate::days_since_epoch() const { return days_from_civil(year, month, day); }

std::string FlexDate::to_iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::string FlexDate::to_short() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d/%02d/%02d", day, month, year % 100);
    return buf;
}

std::optional<FlexDate> try_parse_flexible_date(std::string_view text) {
    auto t = str::trim(text);
    if (t.empty()) return std::nullopt;

    // Numeric forms.
    if (str::is_digit(t.front())) {
        for (char sep : {'/', '-'}) {
            auto parts = str::split(t, sep);
            if (parts.size() != 3) continue;
            int a = 0, b = 0, c = 0;
            if (!parse_int(parts[0], a) || !parse_int(parts[1], b) || !parse_int(parts[2], c)) continue;
            if (parts[0].size() == 4) return make_date(a, b, c);  // YYYY-MM-DD
            if (parts[2].size() == 2) return make_date(kTwoDigitYearBase + c, b, a);
            if (parts[2].size() == 4) return make_date(c, b, a);
            return std::nullopt;
        }
    }

    // Long forms: "September 26, 2022", "Sep 26 2022", "26 September 2022".
    std::string cleaned;
    for (char ch : t) cleaned += (ch == ',') ? ' ' : ch;
    std::vector<std::string> words;
    for (auto& w : str::split(str::collapse_whitespace(cleaned), ' '))
        if (!w.empty()) words.push_back(w);
    if (words.size() != 3) return std::nullopt;
    auto strip_ordinal = [](std::string w) {
        for (std::string_view suf : {"st", "nd", "rd", "th"})
            if (w.size() > 2 && str::ends_with_icase(w, suf)) return w.substr(0, w.size() - 2);
        return w;
    };
    int day = 0, year = 0;
    if (int m = month_from_name(words[0]); m != 0) {
        if (parse_int(strip_ordinal(words[1]), day) && words[2].size() == 4 && parse_int(words[2], year))
            return make_date(year, m, day);
    } else if (int m2 = month_from_name(words[1]); m2 != 0) {
        if (parse_int(strip_ordinal(words[0]), day) && words[2].size() == 4 && parse_int(words[2], year))
            return make_date(year, m2, day);
    }
    return std::nullopt;
}

FlexDate parse_flexible_date(std::string_view text) {
    if (auto d = try_parse_flexible_date(text)) return *d;
    throw Error(ErrorKind::Parse, "unparseable date: '" + std::string(text) + "'");
}

std::int64_t days_between(const FlexDate& earlier, const FlexDate& later) {
    return later.days_since_epoch() - earlier.days_since_epoch();
}

FlexDate Timestamp::date() const {
    std::int64_t days = seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400;
    return FlexDate::from_days(days);
}

std::string Timestamp::to_iso() const {
    const auto d = date();
    const std::int64_t rem = seconds - d.days_since_epoch() * 86400;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", d.to_iso().c_str(), static_cast<int>(rem / 3600),
                  static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
    return buf;
}

Timestamp Timestamp::parse_iso(std::string_view text) {
    auto t = str::trim(text);
    auto fail = [&] { return Error(ErrorKind::Parse, "bad timestamp: '" + std::string(text) + "'"); };
    if (t.size() < 10) throw fail();
    auto d = try_parse_flexible_date(t.substr(0, 10));
    if (!d || t[4] != '-') throw fail();
    int h = 0, mi = 0, s = 0;
    if (t.size() > 10) {
        if ((t[10] != 'T' && t[10] != ' ') || t.size() < 19) throw fail();
        if (!parse_int(t.substr(11, 2), h) || t[13] != ':' || !parse_int(t.substr(14, 2), mi) || t[16] != ':' ||
            !parse_int(t.substr(17, 2), s))
            throw fail();
        auto rest = t.substr(19);
        if (!rest.empty() && rest.front() == '.') {
            std::size_t i = 1;
            while (i < rest.size() && str::is_digit(rest[i])) ++i;
            rest.remove_prefix(i);
        }
        if (!(rest.empty() || rest == "Z" || rest == "+00:00")) throw fail();
        if (h > 23 || mi > 59 || s > 60) throw fail();
    }
    return from_date(*d, h, mi, s);
}

Timestamp Timestamp::from_date(const FlexDate& d, int hour, int minute, int second) {
    return Timestamp{d.days_since_epoch() * 86400 + hour * 3600 + minute * 60 + second};
}

std::string normalize_name(std::string_view raw, Ecosystem eco) {
    auto t = str::trim(raw);
    if (t.empty()) throw Error(ErrorKind::InvalidName, "package name is empty");
    if (eco == Ecosystem::NPM) {
        for (char c : t)
            if (str::is_space(c)) throw Error(ErrorKind::InvalidName, "package name contains whitespace: " + std::string(t));
        return str::to_lower(t);
    }
    std::string out;
    out.reserve(t.size());
    bool in_sep = false;
    for (char c : t) {
        if (str::is_space(c)) throw Error(ErrorKind::InvalidName, "package name contains whitespace: " + std::string(t));
        if (c == '-' || c == '_' || c == '.') {
            if (!in_sep) out += '-';
            in_sep = true;
        } else {
            out += str::lower(c);
            in_sep = false;
        }
    }
    return out;
}

void validate(const IntelRecord& rec) {
    auto bad = [](const std::string& what) { return Error(ErrorKind::InvalidArgument, "invalid record: " + what); };
    if (rec.name.empty()) throw bad("empty name");
    if (normalize_name(rec.name, rec.ecosystem) != rec.name) throw bad("name not canonical: " + rec.name);
    if (rec.discovery_date && *rec.discovery_date > rec.collected_at.date())
        throw bad("discovery date after collection for " + rec.name);
    for (const auto& ioc : rec.iocs)
        if (str::trim(ioc).empty()) throw bad("blank IOC for " + rec.name);
}

namespace {

template <typename J>
J opt_json(const OptString& v) {
    return v ? J(*v) : J(nullptr);
}

template <typename J>
J versions_json(const OptVersions& v) {
    if (!v) return J(nullptr);
    J arr = J::array();
    for (const auto& s : *v) arr.push_back(s);
    return arr;
}

template <typename J>
J set_json(const std::set<std::string>& s) {
    J arr = J::array();
    for (const auto& x : s) arr.push_back(x);
    return arr;
}

OptString opt_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

OptVersions versions_from(const Json& j) {
    if (!j.contains("versions") || j.at("versions").is_null()) return std::nullopt;
    VersionSet v;
    for (const auto& x : j.at("versions")) v.insert(x.get<std::string>());
    return v;
}

std::set<std::string> set_from(const Json& j, const char* key) {
    std::set<std::string> out;
    if (j.contains(key) && !j.at(key).is_null())
        for (const auto& x : j.at(key)) out.insert(x.get<std::string>());
    return out;
}

std::optional<FlexDate> date_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return parse_flexible_date(j.at(key).get<std::string>());
}

}  // namespace

OrderedJson to_json(const IntelRecord& rec) {
    OrderedJson j;
    j["name"] = rec.name;
    j["versions"] = versions_json<OrderedJson>(rec.versions);
    j["discovery_date"] = rec.discovery_date ? OrderedJson(rec.discovery_date->to_iso()) : OrderedJson(nullptr);
    j["repo_url"] = opt_json<OrderedJson>(rec.repo_url);
    j["attack_method"] = opt_json<OrderedJson>(rec.attack_method);
    j["discoverer"] = opt_json<OrderedJson>(rec.discoverer);
    j["impacted_systems"] = opt_json<OrderedJson>(rec.impacted_systems);
    j["attack_vector"] = opt_json<OrderedJson>(rec.attack_vector);
    j["iocs"] = set_json<OrderedJson>(rec.iocs);
    j["collected_at"] = rec.collected_at.to_iso();
    j["source_id"] = rec.source_id;
    j["page_url"] = rec.page_url;
    j["ecosystem"] = to_string(rec.ecosystem);
    if (!rec.notes.empty()) j["notes"] = rec.notes;
    return j;
}

IntelRecord record_from_json(const Json& j) {
    try {
        IntelRecord rec;
        rec.ecosystem = parse_ecosystem(j.at("ecosystem").get<std::string>());
        rec.name = j.at("name").get<std::string>();
        rec.versions = versions_from(j);
        rec.discovery_date = date_from(j, "discovery_date");
        rec.repo_url = opt_from(j, "repo_url");
        rec.attack_method = opt_from(j, "attack_method");
        rec.discoverer = opt_from(j, "discoverer");
        rec.impacted_systems = opt_from(j, "impacted_systems");
        rec.attack_vector = opt_from(j, "attack_vector");
        rec.iocs = set_from(j, "iocs");
        rec.collected_at = Timestamp::parse_iso(j.at("collected_at").get<std::string>());
        rec.source_id = j.at("source_id").get<std::string>();
        rec.page_url = j.at("page_url").get<std::string>();
        if (j.contains("notes")) rec.notes = j.at("notes").get<std::vector<std::string>>();
        return rec;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed record: ") + e.what());
    }
}

OrderedJson to_json(const AggregatedIntel& agg) {
    OrderedJson j;
    j["name"] = agg.name;
    j["ecosystem"] = to_string(agg.ecosystem);
    j["versions"] = versions_json<OrderedJson>(agg.versions);
    j["discovery_date"] = agg.discovery_date ? OrderedJson(agg.discovery_date->to_iso()) : OrderedJson(nullptr);
    j["repo_url"] = opt_json<OrderedJson>(agg.repo_url);
    j["attack_method"] = opt_json<OrderedJson>(agg.attack_method);
    j["discoverer"] = opt_json<OrderedJson>(agg.discoverer);
    j["impacted_systems"] = opt_json<OrderedJson>(agg.impacted_systems);
    j["attack_vector"] = opt_json<OrderedJson>(agg.attack_vector);
    j["iocs"] = set_json<OrderedJson>(agg.iocs);
    OrderedJson prov = OrderedJson::array();
    for (const auto& p : agg.provenance) {
        OrderedJson e;
        e["source_id"] = p.source_id;
        e["page_url"] = p.page_url;
        e["collected_at"] = p.collected_at.to_iso();
        prov.push_back(std::move(e));
    }
    j["provenance"] = std::move(prov);
    j["confirmation_count"] = agg.confirmation_count;
    return j;
}

AggregatedIntel aggregate_from_json(const Json& j) {
    try {
        AggregatedIntel agg;
        agg.name = j.at("name").get<std::string>();
        agg.ecosystem = parse_ecosystem(j.at("ecosystem").get<std::string>());
        agg.versions = versions_from(j);
        agg.discovery_date = date_from(j, "discovery_date");
        agg.repo_url = opt_from(j, "repo_url");
        agg.attack_method = opt_from(j, "attack_method");
        agg.discoverer = opt_from(j, "discoverer");
        agg.impacted_systems = opt_from(j, "impacted_systems");
        agg.attack_vector = opt_from(j, "attack_vector");
        agg.iocs = set_from(j, "iocs");
        for (const auto& p : j.at("provenance"))
            agg.provenance.push_back({p.at("source_id").get<std::string>(), p.at("page_url").get<std::string>(),
                                      Timestamp::parse_iso(p.at("collected_at").get<std::string>())});
        agg.confirmation_count = j.at("confirmation_count").get<int>();
        return agg;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed aggregate: ") + e.what());
    }
}

std::string to_jsonl_line(const IntelRecord& rec) { return to_json(rec).dump() + "\n"; }
std::string to_jsonl_line(const AggregatedIntel& agg) { return to_json(agg).dump() + "\n"; }

std::vector<IntelRecord> read_records_jsonl(const std::string& path) {
    std::vector<IntelRecord> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (str::trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void append_records_jsonl(const std::string& path, const std::vector<IntelRecord>& records) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for append");
    for (const auto& r : records) out << to_jsonl_line(r);
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

}  // namespace pkgintel
