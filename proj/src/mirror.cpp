#include "pkgintel/mirror.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <sstream>

#include "pkgintel/csv.hpp"
#include "pkgintel/html.hpp"
#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

std::string to_string(ProbeStyle s) { return s == ProbeStyle::PypiSimple ? "pypi_simple" : "npm_registry"; }

ProbeStyle parse_probe_style(std::string_view text) {
    if (str::iequals(text, "pypi_simple")) return ProbeStyle::PypiSimple;
    if (str::iequals(text, "npm_registry")) return ProbeStyle::NpmRegistry;
    throw Error(ErrorKind::InvalidArgument, "unknown probe style: " + std::string(text));
}

std::string to_string(Presence p) {
    switch (p) {
        case Presence::Present: return "present";
        case Presence::Absent: return "absent";
        case Presence::Unknown: return "unknown";
    }
    return "unknown";
}

void MirrorTarget::validate() const {
    if (str::trim(label).empty()) throw Error(ErrorKind::InvalidArgument, "mirror label is blank");
    auto u = parse_url(base_url);
    if (!u || !u->is_http()) throw Error(ErrorKind::InvalidArgument, "mirror " + label + ": base_url must be http(s)");
    const bool ok = (ecosystem == Ecosystem::PyPI && style == ProbeStyle::PypiSimple) ||
                    (ecosystem == Ecosystem::NPM && style == ProbeStyle::NpmRegistry);
    if (!ok) throw Error(ErrorKind::InvalidArgument, "mirror " + label + ": probe style does not fit its ecosystem");
}

std::vector<MirrorTarget> mirrors_from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorKind::Parse, "mirror list must be a JSON array");
    std::vector<MirrorTarget> out;
    try {
        for (const auto& m : j) {
            MirrorTarget t;
            t.label = m.at("label").get<std::string>();
            t.ecosystem = parse_ecosystem(m.at("ecosystem").get<std::string>());
            t.base_url = m.at("base_url").get<std::string>();
            while (!t.base_url.empty() && t.base_url.back() == '/') t.base_url.pop_back();
            t.style = m.contains("probe_style") ? parse_probe_style(m.at("probe_style").get<std::string>())
                                                 : (t.ecosystem == Ecosystem::PyPI ? ProbeStyle::PypiSimple
                                                                                  : ProbeStyle::NpmRegistry);
            t.validate();
            out.push_back(std::move(t));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("mirror list: ") + e.what());
    }
    return out;
}

std::vector<MirrorTarget> load_mirror_list(const std::string& path) {
    auto j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, "mirror list is not JSON: " + path);
    return mirrors_from_json(j);
}

OrderedJson to_json(const std::vector<MirrorTarget>& mirrors) {
    OrderedJson arr = OrderedJson::array();
    for (const auto& m : mirrors)
        arr.push_back({{"label", m.label},
                       {"ecosystem", to_string(m.ecosystem)},
                       {"base_url", m.base_url},
                       {"probe_style", to_string(m.style)}});
    return arr;
}

std::vector<std::string> simple_index_files(std::string_view markup) {
    std::vector<std::string> out;
    auto doc = html::parse(markup);
    html::walk(doc.root, [&](const html::Node& n, const std::vector<const html::Node*>&) {
        if (!n.is_element("a")) return true;
        std::string file = str::collapse_whitespace(html::text_content(n));
        if (file.empty()) {
            if (const auto* href = n.attr("href")) {
                std::string h = *href;
                h = h.substr(0, h.find_first_of("#?"));
                file = url_decode(h.substr(h.rfind('/') == std::string::npos ? 0 : h.rfind('/') + 1));
            }
        }
        if (!file.empty()) out.push_back(file);
        return false;
    });
    return out;
}

VersionSet versions_from_filenames(const std::vector<std::string>& filenames, const std::string& name) {
    VersionSet out;
    const std::string want = normalize_name(name, Ecosystem::PyPI);
    for (const auto& f : filenames) {
        std::string stem = f;
        bool wheel = false, egg = false;
        bool matched = false;
        for (std::string_view ext : {".tar.gz", ".tar.bz2", ".tar.xz", ".tgz", ".zip", ".whl", ".egg"}) {
            if (str::ends_with_icase(stem, ext)) {
                wheel = ext == ".whl";
                egg = ext == ".egg";
                stem.resize(stem.size() - ext.size());
                matched = true;
                break;
            }
        }
        if (!matched) continue;
        for (std::size_t i = 0; i < stem.size(); ++i) {
            // versions start with a digit; "foo-bar-baz-1.0" is not foo-bar
            if (stem[i] != '-' || i + 1 >= stem.size() || !str::is_digit(stem[i + 1])) continue;
            std::string prefix = stem.substr(0, i);
            std::string norm;
            try {
                norm = normalize_name(prefix, Ecosystem::PyPI);
            } catch (const Error&) {
                continue;
            }
            if (norm != want) continue;
            std::string version = stem.substr(i + 1);
            if (wheel || egg) version = version.substr(0, version.find('-'));
            if (!version.empty()) out.insert(version);
            break;
        }
    }
    return out;
}

namespace {

std::string probe_url(const MirrorTarget& m, const std::string& name) {
    if (m.style == ProbeStyle::PypiSimple) return m.base_url + "/simple/" + normalize_name(name, Ecosystem::PyPI) + "/";
    std::string n = str::to_lower(name);
    if (!n.empty() && n.front() == '@') {
        auto slash = n.find('/');
        if (slash != std::string::npos) n = n.substr(0, slash) + "%2f" + n.substr(slash + 1);
    }
    return m.base_url + "/" + n;
}

void interpret_200(const MirrorTarget& m, const std::string& name, const std::string& body, ProbeResult& r) {
    if (m.style == ProbeStyle::PypiSimple) {
        auto files = simple_index_files(body);
        r.presence = files.empty() ? Presence::Absent : Presence::Present;
        r.versions = versions_from_filenames(files, name);
        return;
    }
    auto j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        r.presence = Presence::Unknown;
        r.error = "registry answer is not a JSON object";
        return;
    }
    if (!j.contains("versions") || !j["versions"].is_object() || j["versions"].empty()) {
        r.presence = Presence::Absent;
        return;
    }
    r.presence = Presence::Present;
    for (const auto& [v, _] : j["versions"].items()) r.versions.insert(v);
}

}  // namespace

ProbeResult probe_package(const MirrorTarget& mirror, const std::string& name, const CrawlPolicy& policy,
                          HttpClient& client, RateLimiter& limiter, Clock& clock) {
    ProbeResult r;
    std::string url = probe_url(mirror, name);
    int redirects = 0;
    int failures = 0;
    while (true) {
        auto u = parse_url(url);
        if (!u) {
            r.error = "bad probe URL " + url;
            break;
        }
        limiter.acquire(normalize_domain(u->host), policy.min_interval());
        ++r.attempts;
        r.probed_at = clock.wall_now();
        HttpResponse resp;
        try {
            resp = client.get(url, {{"user-agent", policy.user_agents.front()}, {"accept", "*/*"}}, policy.timeout);
        } catch (const FetchError& e) {
            r.http_status = 0;
            r.error = e.what();
            if (failures++ >= policy.retries) break;
            clock.sleep_for(policy.backoff_base * (1 << (failures - 1)));
            continue;
        }
        r.http_status = resp.status;
        if (resp.status >= 300 && resp.status < 400) {
            const auto* loc = resp.header("location");
            auto next = loc ? resolve_url(*u, *loc) : std::nullopt;
            if (!next || ++redirects > policy.max_redirects) {
                r.error = "unusable redirect";
                break;
            }
            url = next->str();
            --r.attempts;
            continue;
        }
        if (resp.status == 200) {
            r.error.clear();
            interpret_200(mirror, name, resp.body, r);
            return r;
        }
        if (resp.status == 404 || resp.status == 410) {
            r.error.clear();
            r.presence = Presence::Absent;
            return r;
        }
        r.error = "HTTP " + std::to_string(resp.status);
        if (resp.status == 429 || resp.status >= 500) {
            if (failures++ >= policy.retries) break;
            clock.sleep_for(policy.backoff_base * (1 << (failures - 1)));
            continue;
        }
        break;
    }
    r.presence = Presence::Unknown;
    return r;
}

MirrorReport scan_mirrors(const std::vector<AggregatedIntel>& packages, const std::vector<MirrorTarget>& mirrors,
                          const CrawlPolicy& policy, HttpClient& client, Clock& clock, RateLimiter& limiter) {
    policy.validate();
    std::vector<std::future<std::vector<MirrorRow>>> jobs;
    for (const auto& m : mirrors) {
        m.validate();
        jobs.push_back(std::async(std::launch::async, [&, m] {
            std::vector<MirrorRow> rows;
            for (const auto& p : packages) {
                if (p.ecosystem != m.ecosystem) continue;
                MirrorRow row{p.name, p.ecosystem, m.label, probe_package(m, p.name, policy, client, limiter, clock)};
                if (row.result.presence == Presence::Unknown)
                    log::warn("mirror " + m.label + ": " + p.name + " unknown (" + row.result.error + ")");
                rows.push_back(std::move(row));
            }
            return rows;
        }));
    }
    MirrorReport rep;
    for (auto& j : jobs) {
        auto rows = j.get();
        rep.rows.insert(rep.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    }
    std::sort(rep.rows.begin(), rep.rows.end(), [](const MirrorRow& a, const MirrorRow& b) {
        return std::tie(a.package, a.mirror) < std::tie(b.package, b.mirror);
    });
    for (const auto& m : mirrors) rep.summary[m.label];
    for (const auto& r : rep.rows) {
        auto& s = rep.summary[r.mirror];
        switch (r.result.presence) {
            case Presence::Present: ++s.present; break;
            case Presence::Absent: ++s.absent; break;
            case Presence::Unknown: ++s.unknown; break;
        }
    }
    return rep;
}

MirrorReport scan_mirrors(const IntelStore& store, const std::vector<MirrorTarget>& mirrors, const CrawlPolicy& policy,
                          HttpClient& client, Clock& clock, RateLimiter& limiter) {
    return scan_mirrors(store.all(), mirrors, policy, client, clock, limiter);
}

namespace {

std::string status_text(const ProbeResult& r) {
    if (r.http_status == 0) return "no-response";
    return std::to_string(r.http_status);
}

}  // namespace

std::string report_csv(const MirrorReport& rep) {
    std::string out = csv::format_row({"package", "versions", "mirror", "present", "status", "probed_at"}) + "\n";
    for (const auto& r : rep.rows) {
        out += csv::format_row({r.package, str::join(r.result.versions, " "), r.mirror,
                                r.result.presence == Presence::Present  ? "yes"
                                : r.result.presence == Presence::Absent ? "no"
                                                                        : "unknown",
                                status_text(r.result), r.result.probed_at.to_iso()}) +
               "\n";
    }
    return out;
}

std::string render_mirror_table(const MirrorReport& rep) {
    std::vector<std::string> mirrors;
    for (const auto& [label, _] : rep.summary) mirrors.push_back(label);
    std::map<std::string, std::map<std::string, const MirrorRow*>> grid;
    std::map<std::string, VersionSet> versions;
    for (const auto& r : rep.rows) {
        grid[r.package][r.mirror] = &r;
        versions[r.package].insert(r.result.versions.begin(), r.result.versions.end());
    }
    std::size_t wn = 7, wv = 8;
    for (const auto& [p, v] : versions) {
        wn = std::max(wn, p.size());
        wv = std::max(wv, str::join(v, ", ").size());
    }
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    std::ostringstream out;
    out << pad("package", wn) << "  " << pad("versions", wv);
    for (const auto& m : mirrors) out << "  " << m;
    out << "\n";
    for (const auto& [p, cols] : grid) {
        out << pad(p, wn) << "  " << pad(str::join(versions[p], ", "), wv);
        for (const auto& m : mirrors) {
            auto it = cols.find(m);
            std::string mark = it == cols.end()                                       ? " "
                               : it->second->result.presence == Presence::Present ? "Y"
                               : it->second->result.presence == Presence::Absent  ? "-"
                                                                                   : "?";
            out << "  " << pad(mark, m.size());
        }
        out << "\n";
    }
    out << "\n";
    for (const auto& [m, s] : rep.summary)
        out << m << ": " << s.present << " present, " << s.absent << " absent, " << s.unknown << " unknown\n";
    return out.str();
}

OrderedJson to_json(const MirrorReport& rep) {
    OrderedJson rows = OrderedJson::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"package", r.package},
                        {"ecosystem", to_string(r.ecosystem)},
                        {"mirror", r.mirror},
                        {"presence", to_string(r.result.presence)},
                        {"versions", r.result.versions},
                        {"http_status", r.result.http_status},
                        {"attempts", r.result.attempts},
                        {"error", r.result.error},
                        {"probed_at", r.result.probed_at.to_iso()}});
    OrderedJson summary = OrderedJson::object();
    for (const auto& [m, s] : rep.summary)
        summary[m] = {{"present", s.present}, {"absent", s.absent}, {"unknown", s.unknown}};
    return {{"rows", rows}, {"summary", summary}};
}

}  // namespace pkgintel
