#include "pkgintel/deterministic_backend.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "pkgintel/log.hpp"
#include "pkgintel/strings.hpp"

namespace pkgintel {

namespace {

// ---------------------------------------------------------------- vocabulary

const std::set<std::string>& cue_words() {
    static const std::set<std::string> s = {"package", "packages", "library",  "libraries",    "module",
                                            "modules", "pypi",     "npm",      "dependency",   "dependencies",
                                            "typosquat", "typosquats", "typosquatting", "malicious"};
    return s;
}

const std::set<std::string>& connector_words() {
    static const std::set<std::string> s = {"and", "or", "&", "the", "named", "called", "as", "plus", "nor", "also"};
    return s;
}

// Non-dictionary words that are common in threat reports but are not package names.
const std::set<std::string>& stoplist() {
    static const std::set<std::string> s = {
        "pypi",     "npm",      "npmjs",     "pip",        "pip3",       "github",      "gitlab",     "bitbucket",
        "python",   "python3",  "javascript", "nodejs",    "node.js",    "js",          "typescript", "yarn",
        "pnpm",     "json",     "yaml",      "api",        "apis",       "url",         "urls",       "http",
        "https",    "html",     "ioc",       "iocs",       "sha256",     "sha1",        "md5",        "base64",
        "exe",      "dll",      "discord",   "telegram",   "powershell", "cmd",         "typosquatting",
        "typosquat", "typosquats", "typosquatted", "typosquatters", "malware", "infostealer", "infostealers",
        "stealer",  "cryptominer", "cryptojacking", "webhook", "webhooks", "c2",       "cve",        "osv",
        "snyk",     "jfrog",    "phylum",    "sonatype",   "checkmarx",  "reversinglabs", "fortinet", "datadog",
        "readme",   "setup.py", "env",       "ip",         "ips",        "os",          "macos",      "linux",
        "windows",  "ubuntu",   "android",   "ios",        "repo",       "repos",       "cli",        "ci",
        "ci/cd",    "sdk",      "rce",       "poc",        "aws",        "gcp",         "azure",      "ssh",
        "vscode",   "e.g",      "i.e",       "etc",        "tor",        "vpn",         "dns",        "tls",
        "ssl",      "wasm",     "npm's",     "pypi's",     "github's",   "maintainers", "devs",       "osint",
        "subdomain", "payloads", "obfuscated", "deobfuscated", "exfiltrate", "exfiltrated", "exfiltration",
    };
    return s;
}

const std::set<std::string>& npm_cues() {
    static const std::set<std::string> s = {"npm", "npmjs", "node.js", "nodejs", "javascript", "yarn", "pnpm"};
    return s;
}

const std::set<std::string>& pypi_cues() {
    static const std::set<std::string> s = {"pypi", "pip", "pip3", "python", "python3", "pypi.org"};
    return s;
}

const std::vector<std::string>& attack_methods() {
    static const std::vector<std::string> v = {"dependency confusion", "typosquatting",   "typo-squatting",
                                               "combosquatting",       "starjacking",     "brandjacking",
                                               "account takeover",     "protestware",     "malicious update",
                                               "repojacking",          "manifest confusion"};
    return v;
}

const std::vector<std::string>& attack_vectors() {
    static const std::vector<std::string> v = {"postinstall script",    "preinstall script", "install script",
                                               "install hook",          "setup.py",          "__init__.py",
                                               "base64-encoded payload", "obfuscated javascript",
                                               "obfuscated code",        "import hook",       "malicious binary"};
    return v;
}

const std::set<std::string>& reference_hosts() {
    static const std::set<std::string> s = {"pypi.org",    "npmjs.com",     "www.npmjs.com", "github.com",
                                            "gitlab.com",  "osv.dev",       "nvd.nist.gov",  "cve.mitre.org",
                                            "snyk.io",     "security.snyk.io", "twitter.com", "x.com"};
    return s;
}

const std::set<std::string>& ioc_cues() {
    static const std::set<std::string> s = {"domain",  "domains",  "server",   "servers", "c2",       "c&c",
                                            "contacts", "connects", "sends",   "send",    "webhook",  "beacon",
                                            "beacons", "hosted",   "ioc",      "iocs",    "indicator", "indicators",
                                            "download", "downloads", "sent", "posts", "exfiltrates", "exfiltrate", "exfiltrated"};
    return s;
}

// ---------------------------------------------------------------- tokens

struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string lower;
};

bool inner_punct(char c) { return c == '-' || c == '_' || c == '.' || c == '@' || c == '/'; }
bool token_char(char c) { return str::is_alnum(c) || inner_punct(c) || c == '\'' || static_cast<unsigned char>(c) >= 0x80; }

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !token_char(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && token_char(s[j])) ++j;
        std::size_t b = i, e = j;
        while (b < e && (inner_punct(s[b]) || s[b] == '\'') && s[b] != '@') ++b;
        while (e > b && (inner_punct(s[e - 1]) || s[e - 1] == '\'')) --e;
        // Possessive "'s" belongs to the preceding word, not the token.
        if (e - b > 2 && s[e - 2] == '\'' && (s[e - 1] == 's' || s[e - 1] == 'S')) e -= 2;
        if (e > b) {
            Token t;
            t.text = std::string(s.substr(b, e - b));
            t.begin = b;
            t.end = e;
            t.lower = str::to_lower(t.text);
            out.push_back(std::move(t));
        }
        i = j;
    }
    return out;
}

bool all_hex(std::string_view t) {
    return std::all_of(t.begin(), t.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; });
}

bool is_hash(std::string_view t) { return (t.size() == 32 || t.size() == 40 || t.size() == 64) && all_hex(t); }

bool is_ipv4(std::string_view t) {
    auto parts = str::split(t, '.');
    if (parts.size() != 4) return false;
    for (const auto& p : parts) {
        if (p.empty() || p.size() > 3 || !std::all_of(p.begin(), p.end(), [](char c) { return str::is_digit(c); }))
            return false;
        if (std::stoi(p) > 255) return false;
    }
    return true;
}

const std::regex& version_re() {
    static const std::regex re(R"(^[vV]?(\d+(?:\.\d+){1,3}(?:(?:a|b|rc|alpha|beta|dev|post)\d*)?)$)");
    return re;
}

const std::regex& domain_re() {
    static const std::regex re(
        R"(^[a-z0-9][a-z0-9-]*(?:\.[a-z0-9-]+)*\.(?:com|net|org|io|ru|xyz|top|site|info|cn|cc|tk|pw|online|me|biz|su|club|live|app|dev|sh)$)");
    return re;
}

bool has_file_extension(std::string_view lower) {
    for (std::string_view ext : {".py", ".js", ".exe", ".sh", ".json", ".txt", ".dll", ".bat", ".ps1", ".zip",
                                 ".tar.gz", ".whl", ".vbs", ".html", ".cjs", ".mjs", ".ts"})
        if (lower.size() > ext.size() && lower.substr(lower.size() - ext.size()) == ext) return true;
    return false;
}

bool is_proper_noun(std::string_view t) {
    if (t.size() < 2 || !std::isupper(static_cast<unsigned char>(t[0]))) return false;
    return std::all_of(t.begin() + 1, t.end(), [](char c) { return std::islower(static_cast<unsigned char>(c)) != 0; });
}

/// Shapes that are never package names regardless of context.
bool excluded_shape(const Token& t) {
    const auto& l = t.lower;
    if (stoplist().count(l)) return true;
    if (is_hash(l) || is_ipv4(l) || std::regex_match(l, version_re())) return true;
    if (std::regex_match(l, domain_re()) || has_file_extension(l)) return true;
    if (l.find('/') != std::string::npos && l.front() != '@') return true;
    if (l.find('\'') != std::string::npos) return true;
    if (l.find("..") != std::string::npos) return true;
    return std::all_of(l.begin(), l.end(), [](char c) { return str::is_digit(c) || c == '.' || c == '-'; });
}

// ---------------------------------------------------------------- mentions

struct Mention {
    EntityKind kind;
    std::string value;
    std::size_t pos = 0;
};

struct Span {
    std::size_t begin, end;
};

bool inside(const std::vector<Span>& spans, std::size_t b, std::size_t e) {
    return std::any_of(spans.begin(), spans.end(), [&](const Span& s) { return b < s.end && e > s.begin; });
}

std::string strip_url_tail(std::string u) {
    while (!u.empty() && std::string_view(".,;:!?)]'\"").find(u.back()) != std::string_view::npos) u.pop_back();
    return u;
}

bool is_repo_url(std::string_view url) {
    static const std::regex re(
        R"(^https?://(?:www\.)?(?:(?:github\.com|gitlab\.com|bitbucket\.org)/[\w.-]+/[\w.-]+/?|pypi\.org/project/[\w.-]+/?|npmjs\.com/package/(?:@[\w.-]+/)?[\w.-]+/?)$)",
        std::regex::icase);
    return std::regex_match(url.begin(), url.end(), re);
}

std::string url_host(std::string_view url) {
    auto p = url.find("://");
    if (p == std::string_view::npos) return {};
    auto rest = url.substr(p + 3);
    auto end = rest.find_first_of("/?#:");
    return str::to_lower(rest.substr(0, end));
}

std::size_t find_icase_word(std::string_view text, std::string_view phrase, std::size_t from = 0) {
    auto t = str::to_lower(text);
    auto p = str::to_lower(phrase);
    auto word = [](char c) { return str::is_alnum(c) || c == '_'; };
    std::size_t pos = from;
    while ((pos = t.find(p, pos)) != std::string::npos) {
        const std::size_t end = pos + p.size();
        const bool left = pos == 0 || !word(t[pos - 1]) || !word(p.front());
        const bool right = end >= t.size() || !word(t[end]) || !word(p.back());
        if (left && right) return pos;
        ++pos;
    }
    return std::string::npos;
}

struct SegmentScan {
    std::vector<Token> tokens;
    std::vector<Mention> mentions;  // every kind except package names
    int npm_votes = 0;
    int pypi_votes = 0;
};

SegmentScan scan_segment(std::string_view text, const std::string& own_host) {
    SegmentScan out;
    std::vector<Span> taken;

    static const std::regex url_re(R"((?:https?|hxxps?)://[^\s<>"'()\{\}|\\^`]+)", std::regex::icase);
    for (std::cregex_iterator it(text.data(), text.data() + text.size(), url_re), end; it != end; ++it) {
        auto u = strip_url_tail(it->str());
        const std::size_t b = static_cast<std::size_t>(it->position());
        taken.push_back({b, b + std::max<std::size_t>(u.size(), it->str().size())});
        if (is_repo_url(u)) {
            out.mentions.push_back({EntityKind::RepositoryUrl, u, b});
            continue;
        }
        auto host = url_host(u);
        if (host == own_host || reference_hosts().count(host)) continue;
        out.mentions.push_back({EntityKind::Ioc, u, b});
    }
    static const std::regex defanged_re(R"(\b[a-z0-9-]+(?:\[\.\][a-z0-9-]+)+(?:/[^\s<>"']*)?)", std::regex::icase);
    for (std::cregex_iterator it(text.data(), text.data() + text.size(), defanged_re), end; it != end; ++it) {
        const std::size_t b = static_cast<std::size_t>(it->position());
        if (inside(taken, b, b + it->length())) continue;
        auto v = strip_url_tail(it->str());
        taken.push_back({b, b + v.size()});
        out.mentions.push_back({EntityKind::Ioc, v, b});
    }

    static const std::regex date_res[] = {
        std::regex(R"(\b\d{1,2}/\d{1,2}/(?:\d{4}|\d{2})\b)"),
        std::regex(R"(\b\d{4}-\d{2}-\d{2}\b)"),
        std::regex(
            R"(\b(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4}\b)",
            std::regex::icase),
        std::regex(
            R"(\b\d{1,2}(?:st|nd|rd|th)?\s+(?:jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?,?\s+\d{4}\b)",
            std::regex::icase),
    };
    std::vector<Mention> dates;
    for (const auto& re : date_res) {
        for (std::cregex_iterator it(text.data(), text.data() + text.size(), re), end; it != end; ++it) {
            const std::size_t b = static_cast<std::size_t>(it->position());
            if (inside(taken, b, b + it->length())) continue;
            if (!try_parse_flexible_date(it->str())) continue;
            taken.push_back({b, b + static_cast<std::size_t>(it->length())});
            dates.push_back({EntityKind::DiscoveryDate, it->str(), b});
        }
    }
    out.mentions.insert(out.mentions.end(), dates.begin(), dates.end());

    out.tokens = tokenize(text);
    bool ioc_context = false;
    for (const auto& t : out.tokens) {
        if (ioc_cues().count(t.lower)) ioc_context = true;
        if (npm_cues().count(t.lower)) ++out.npm_votes;
        if (pypi_cues().count(t.lower)) ++out.pypi_votes;
    }
    std::optional<std::size_t> last_version_token;
    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
        const auto& t = out.tokens[i];
        if (inside(taken, t.begin, t.end)) continue;
        std::smatch m;
        if (std::regex_match(t.text, m, version_re()) && !is_ipv4(t.text)) {
            const std::string v = m[1].str();
            const bool three_part = std::count(v.begin(), v.end(), '.') >= 2;
            bool cued = three_part || t.text[0] == 'v' || t.text[0] == 'V';
            for (std::size_t k = i >= 3 ? i - 3 : 0; k < i && !cued; ++k) {
                const auto& l = out.tokens[k].lower;
                if (l == "version" || l == "versions" || l == "v" || l == "release" || l == "releases") cued = true;
            }
            if (!cued && last_version_token && i - *last_version_token <= 2) cued = true;
            if (cued) {
                const std::size_t offset = t.text.size() - v.size();
                out.mentions.push_back({EntityKind::Version, v, t.begin + offset});
                last_version_token = i;
            }
            continue;
        }
        if (is_hash(t.lower) || is_ipv4(t.lower)) {
            out.mentions.push_back({EntityKind::Ioc, t.text, t.begin});
            continue;
        }
        if (ioc_context && std::regex_match(t.lower, domain_re())) out.mentions.push_back({EntityKind::Ioc, t.text, t.begin});
    }

    auto lexicon = [&](const std::vector<std::string>& phrases, EntityKind kind) {
        std::optional<Mention> first;
        for (const auto& p : phrases) {
            auto pos = find_icase_word(text, p);
            if (pos == std::string::npos) continue;
            if (!first || pos < first->pos) first = Mention{kind, std::string(text.substr(pos, p.size())), pos};
        }
        if (first) out.mentions.push_back(*first);
    };
    lexicon(attack_methods(), EntityKind::AttackMethod);
    lexicon(attack_vectors(), EntityKind::AttackVector);

    static const std::string os = R"((?:Windows|Linux|macOS|Mac OS X|MacOS|Ubuntu|Android|iOS))";
    static const std::regex systems_re(os + R"((?:(?:,\s*and\s+|,\s*or\s+|,\s*|\s+and\s+|\s+or\s+))" + os +
                                       R"()*(?:\s+(?:systems|hosts|machines|users|devices|platforms))?)");
    for (std::cregex_iterator it(text.data(), text.data() + text.size(), systems_re), end; it != end; ++it) {
        const std::size_t b = static_cast<std::size_t>(it->position());
        if (inside(taken, b, b + it->length())) continue;
        out.mentions.push_back({EntityKind::ImpactedSystems, it->str(), b});
        break;
    }

    static const std::string org = R"(([A-Z][\w&.-]*(?:\s+[A-Z][\w&.-]*){0,3}))";
    static const std::regex disc_res[] = {
        std::regex(R"(\b(?:discovered|reported|identified|found|detected|flagged|uncovered|spotted|disclosed)\s+by\s+(?:the\s+)?)" + org),
        std::regex(R"(\bresearchers?\s+(?:at|from|with)\s+)" + org),
        std::regex(org + R"((?:'s)?\s+(?:security\s+)?(?:research\s+team|researchers|research|team|Labs)\s+(?:discovered|found|identified|reported|detected|flagged|uncovered|spotted))"),
    };
    std::optional<Mention> disc;
    for (const auto& re : disc_res) {
        std::cmatch m;
        if (!std::regex_search(text.data(), text.data() + text.size(), m, re)) continue;
        std::string who = m[1].str();
        std::size_t pos = static_cast<std::size_t>(m.position(1));
        for (std::string_view lead : {"The ", "Our ", "A ", "An "}) {
            if (who.rfind(lead, 0) == 0) {
                who = who.substr(lead.size());
                pos += lead.size();
            }
        }
        while (!who.empty() && (who.back() == '.' || who.back() == '-')) who.pop_back();
        static const std::set<std::string> generic = {"We", "Our", "The", "A", "An", "My", "Their", "This", "Its",
                                                      "Researchers", "Security"};
        if (who.empty() || generic.count(who)) continue;
        if (!disc || pos < disc->pos) disc = Mention{EntityKind::Discoverer, who, pos};
    }
    if (disc) out.mentions.push_back(*disc);

    std::stable_sort(out.mentions.begin(), out.mentions.end(),
                     [](const Mention& a, const Mention& b) { return a.pos < b.pos; });
    return out;
}

// ---------------------------------------------------------------- segmentation

bool has_cue(std::string_view text) {
    for (const auto& t : tokenize(text))
        if (cue_words().count(t.lower)) return true;
    return false;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool stop = c == '\n' || ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() && text[i + 1] == ' ');
        if (!stop) continue;
        if (c != '\n') {
            std::size_t k = i + 1;
            while (k < text.size() && text[k] == ' ') ++k;
            if (k < text.size() && !(std::isupper(static_cast<unsigned char>(text[k])) || text[k] == '"')) continue;
        }
        auto s = str::trim(text.substr(start, i + 1 - start));
        if (!s.empty()) out.emplace_back(s);
        start = i + 1;
    }
    auto s = str::trim(text.substr(std::min(start, text.size())));
    if (!s.empty()) out.emplace_back(s);
    return out;
}

}  // namespace

std::optional<EntityKind> classify_header(std::string_view header, bool* is_ecosystem) {
    if (is_ecosystem) *is_ecosystem = false;
    const std::string h = " " + str::collapse_whitespace(str::to_lower(header)) + " ";
    auto has = [&](std::string_view w) { return h.find(w) != std::string::npos; };
    auto word = [&](std::string_view w) { return h.find(" " + std::string(w) + " ") != std::string::npos; };
    if (has("version")) return EntityKind::Version;
    if (has("discovered by") || has("reported by") || has("found by") || has("discoverer") || has("reporter") ||
        has("researcher") || word("credit"))
        return EntityKind::Discoverer;
    if (has("date") || has("discovered") || has("published") || has("first seen") || has("detected") || word("when"))
        return EntityKind::DiscoveryDate;
    if (has("repo") || word("github") || has("source url")) return EntityKind::RepositoryUrl;
    if (word("ioc") || word("iocs") || has("indicator") || has("hash") || word("sha256") || word("md5") ||
        word("c2") || word("domain") || word("domains") || has("ip address") || word("url") || word("urls"))
        return EntityKind::Ioc;
    if (has("ecosystem") || has("registry")) {
        if (is_ecosystem) *is_ecosystem = true;
        return std::nullopt;
    }
    if (has("method") || has("attack type") || has("technique") || word("type")) return EntityKind::AttackMethod;
    if (has("vector") || has("delivery") || has("behavior") || has("behaviour") || has("payload"))
        return EntityKind::AttackVector;
    if (has("impact") || has("platform") || word("os") || has("target") || has("system")) return EntityKind::ImpactedSystems;
    if (has("package") || word("name") || has("library") || has("module")) return EntityKind::PackageName;
    return std::nullopt;
}

std::vector<Segment> segment_document(const PageDocument& doc) {
    std::vector<Segment> out;
    for (std::size_t bi = 0; bi < doc.blocks.size(); ++bi) {
        const auto& block = doc.blocks[bi];
        const bool prev_cue = bi > 0 && has_cue(doc.blocks[bi - 1].text);
        auto push = [&](std::string text) {
            Segment s;
            s.text = std::move(text);
            s.block = bi;
            s.kind = block.kind;
            s.inherits_cue = prev_cue;
            out.push_back(std::move(s));
        };
        switch (block.kind) {
            case BlockKind::Paragraph:
                for (auto& s : split_sentences(block.text)) push(std::move(s));
                break;
            case BlockKind::List:
                for (const auto& item : str::split(block.text, '\n'))
                    if (!str::trim(item).empty()) push(std::string(str::trim(item)));
                break;
            case BlockKind::Table:
            case BlockKind::IframeCsv: {
                const Cells cells = block.cells.value_or(Cells{});
                if (cells.empty()) break;
                std::vector<std::optional<EntityKind>> kinds;
                std::optional<std::size_t> eco_col;
                bool has_pkg = false;
                for (std::size_t c = 0; c < cells[0].size(); ++c) {
                    bool eco = false;
                    kinds.push_back(classify_header(cells[0][c], &eco));
                    if (eco) eco_col = c;
                    if (kinds.back() == EntityKind::PackageName) has_pkg = true;
                }
                if (!has_pkg) {
                    for (const auto& row : cells) push(str::join(row, " | "));
                    break;
                }
                for (std::size_t r = 1; r < cells.size(); ++r) {
                    const auto& row = cells[r];
                    Segment s;
                    s.text = str::join(row, " | ");
                    s.block = bi;
                    s.kind = block.kind;
                    s.typed_row = true;
                    s.inherits_cue = prev_cue;
                    for (std::size_t c = 0; c < row.size() && c < kinds.size(); ++c) {
                        const auto cell = str::trim(row[c]);
                        if (cell.empty() || str::iequals(cell, "n/a") || cell == "-") continue;
                        if (eco_col && c == *eco_col) {
                            try {
                                s.row_ecosystem = to_string(parse_ecosystem(cell));
                            } catch (const Error&) {
                            }
                            continue;
                        }
                        if (!kinds[c]) continue;
                        const EntityKind k = *kinds[c];
                        if (k == EntityKind::Version || k == EntityKind::Ioc || k == EntityKind::PackageName) {
                            for (auto part : str::split(cell, ',')) {
                                for (auto piece : str::split(part, ';')) {
                                    auto p = str::trim(piece);
                                    if (!p.empty()) s.cells.emplace_back(k, std::string(p));
                                }
                            }
                        } else {
                            s.cells.emplace_back(k, std::string(cell));
                        }
                    }
                    out.push_back(std::move(s));
                }
                break;
            }
            default:
                push(block.text);
                break;
        }
    }
    return out;
}

namespace {

std::string own_host_of(const PageDocument& doc) { return url_host(doc.url); }

/// Token indices of candidate package names that qualify by context.
std::vector<std::size_t> qualify_packages(const Segment& seg, const SegmentScan& scan,
                                          const std::set<std::string>& candidates) {
    const auto& toks = scan.tokens;
    std::vector<bool> shape(toks.size(), false), ok(toks.size(), false);
    const bool prose = seg.kind != BlockKind::Code;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!candidates.count(toks[i].text) || excluded_shape(toks[i])) continue;
        if (prose && is_proper_noun(toks[i].text)) continue;
        shape[i] = true;
    }
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!shape[i]) continue;
        for (std::size_t j = i >= 3 ? i - 3 : 0; j < toks.size() && j <= i + 3 && !ok[i]; ++j)
            if (j != i && cue_words().count(toks[j].lower)) ok[i] = true;
        if (toks[i].text.front() == '@') ok[i] = true;
    }
    // pip install / npm install arguments
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        const auto& tool = toks[i].lower;
        if (!(tool == "pip" || tool == "pip3" || tool == "npm" || tool == "yarn" || tool == "pnpm")) continue;
        const auto& verb = toks[i + 1].lower;
        if (!(verb == "install" || verb == "i" || verb == "add")) continue;
        for (std::size_t k = i + 2; k < toks.size(); ++k) {
            if (seg.text.find('\n', toks[i].end) < toks[k].begin) break;
            if (shape[k]) ok[k] = true;
        }
    }
    if (seg.inherits_cue && (seg.kind == BlockKind::List || seg.kind == BlockKind::Table ||
                             seg.kind == BlockKind::IframeCsv)) {
        for (std::size_t i = 0; i < toks.size(); ++i)
            if (shape[i]) {
                ok[i] = true;
                break;
            }
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (!shape[i] || ok[i]) continue;
            for (std::size_t j = 0; j < toks.size(); ++j) {
                if (!ok[j] || (i > j ? i - j : j - i) > 3) continue;
                const std::size_t lo = std::min(i, j) + 1, hi = std::max(i, j);
                bool bridge = true;
                for (std::size_t k = lo; k < hi; ++k)
                    if (!(connector_words().count(toks[k].lower) || shape[k])) bridge = false;
                if (bridge) {
                    ok[i] = true;
                    changed = true;
                    break;
                }
            }
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < toks.size(); ++i)
        if (ok[i]) out.push_back(i);
    return out;
}

std::string lower(std::string_view s) { return str::to_lower(str::trim(s)); }

std::string reply_for(const OrderedJson& j) { return j.dump(); }

int word_count(std::string_view s) {
    int n = 0;
    bool in = false;
    for (char c : s) {
        if (str::is_space(c)) in = false;
        else if (!in) {
            in = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::size_t> word_positions(std::string_view text, std::string_view name) {
    std::vector<std::size_t> out;
    const auto t = str::to_lower(text);
    const auto n = str::to_lower(name);
    if (n.empty()) return out;
    auto word = [](char c) { return str::is_alnum(c) || c == '_' || c == '-' || static_cast<unsigned char>(c) >= 0x80; };
    std::size_t pos = 0;
    while ((pos = t.find(n, pos)) != std::string::npos) {
        const std::size_t end = pos + n.size();
        if ((pos == 0 || !word(t[pos - 1])) && (end >= t.size() || !word(t[end]))) out.push_back(pos);
        ++pos;
    }
    return out;
}

/// Version strings must not be a prefix of a longer dotted number.
bool contains_version(std::string_view text, std::string_view v) {
    const auto t = str::to_lower(text);
    const auto n = str::to_lower(v);
    if (n.empty()) return false;
    std::size_t pos = 0;
    while ((pos = t.find(n, pos)) != std::string::npos) {
        const std::size_t end = pos + n.size();
        const bool left = pos == 0 || !(str::is_alnum(t[pos - 1]) || t[pos - 1] == '.');
        bool right = end >= t.size() || !(str::is_alnum(t[end]) || t[end] == '.');
        if (!right && t[end] == '.' && (end + 1 >= t.size() || !str::is_alnum(t[end + 1]))) right = true;
        if (left && right) return true;
        ++pos;
    }
    return false;
}

}  // namespace

EntitySet DeterministicBackend::extract_entities(const PageDocument& doc, const std::set<std::string>& candidates) const {
    EntitySet e;
    const auto host = own_host_of(doc);
    for (const auto& seg : segment_document(doc)) {
        if (seg.typed_row) {
            for (const auto& [kind, value] : seg.cells) {
                if (kind == EntityKind::PackageName) {
                    Token t{value, 0, value.size(), lower(value)};
                    if (value.find(' ') != std::string::npos || stoplist().count(t.lower)) continue;
                }
                e.add(kind, value);
            }
            auto scan = scan_segment(seg.text, host);
            for (const auto& m : scan.mentions) e.add(m.kind, m.value);
            continue;
        }
        auto scan = scan_segment(seg.text, host);
        std::vector<Mention> all = scan.mentions;
        for (auto i : qualify_packages(seg, scan, candidates))
            all.push_back({EntityKind::PackageName, scan.tokens[i].text, scan.tokens[i].begin});
        std::stable_sort(all.begin(), all.end(), [](const Mention& a, const Mention& b) { return a.pos < b.pos; });
        for (const auto& m : all) e.add(m.kind, m.value);
    }
    return e;
}

std::vector<RecordDraft> DeterministicBackend::relate_entities(const EntitySet& entities, const PageDocument& doc) const {
    const auto& names = entities.package_names();
    if (names.empty()) return {};
    const auto host = own_host_of(doc);
    const auto segments = segment_document(doc);

    // Lowercased entity value -> canonical spelling, per kind.
    std::map<EntityKind, std::map<std::string, std::string>> known;
    for (auto k : all_entity_kinds())
        for (const auto& v : entities.values(k)) known[k].emplace(lower(v), v);

    struct SegMentions {
        std::vector<Mention> packages;
        std::vector<Mention> others;
        int npm = 0, pypi = 0;
        std::optional<std::string> row_eco;
    };
    std::vector<SegMentions> per(segments.size());
    std::map<EntityKind, std::set<std::string>> recognized;
    for (std::size_t si = 0; si < segments.size(); ++si) {
        const auto& seg = segments[si];
        auto& sm = per[si];
        auto scan = scan_segment(seg.text, host);
        sm.npm = scan.npm_votes;
        sm.pypi = scan.pypi_votes;
        sm.row_eco = seg.row_ecosystem;
        if (seg.typed_row) {
            for (const auto& [kind, value] : seg.cells) {
                auto it = known[kind].find(lower(value));
                if (it == known[kind].end()) continue;
                (kind == EntityKind::PackageName ? sm.packages : sm.others).push_back({kind, it->second, 0});
                recognized[kind].insert(it->first);
            }
        } else {
            for (const auto& [low, canon] : known[EntityKind::PackageName])
                for (auto pos : word_positions(seg.text, low)) {
                    sm.packages.push_back({EntityKind::PackageName, canon, pos});
                    recognized[EntityKind::PackageName].insert(low);
                }
        }
        for (const auto& m : scan.mentions) {
            auto it = known[m.kind].find(lower(m.value));
            if (it == known[m.kind].end()) continue;
            sm.others.push_back({m.kind, it->second, seg.typed_row ? 0 : m.pos});
            recognized[m.kind].insert(it->first);
        }
    }
    // Values the recognizers did not produce (e.g. from another analyzer): locate verbatim.
    for (auto k : all_entity_kinds()) {
        if (k == EntityKind::PackageName) continue;
        for (const auto& [low, canon] : known[k]) {
            if (recognized[k].count(low)) continue;
            for (std::size_t si = 0; si < segments.size(); ++si) {
                auto pos = str::to_lower(segments[si].text).find(low);
                if (pos != std::string::npos) per[si].others.push_back({k, canon, pos});
            }
        }
    }

    std::vector<RecordDraft> drafts;
    std::map<std::string, std::size_t> index;
    std::map<std::string, std::pair<int, int>> eco_votes;
    auto draft_for = [&](const std::string& name) -> RecordDraft& {
        auto key = lower(name);
        auto it = index.find(key);
        if (it != index.end()) return drafts[it->second];
        index.emplace(key, drafts.size());
        RecordDraft d;
        d.package_name = name;
        drafts.push_back(std::move(d));
        return drafts.back();
    };
    auto attach = [&](RecordDraft& d, const Mention& m) {
        auto push_unique = [](std::vector<std::string>& v, const std::string& s) {
            if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
        };
        auto fill = [&](OptString& f) {
            if (!f) f = m.value;
        };
        switch (m.kind) {
            case EntityKind::Version: push_unique(d.version, m.value); break;
            case EntityKind::Ioc: push_unique(d.ioc, m.value); break;
            case EntityKind::DiscoveryDate: fill(d.discovery_date); break;
            case EntityKind::RepositoryUrl: fill(d.repository_url); break;
            case EntityKind::AttackMethod: fill(d.attack_method); break;
            case EntityKind::Discoverer: fill(d.discoverer); break;
            case EntityKind::ImpactedSystems: fill(d.impacted_systems); break;
            case EntityKind::AttackVector: fill(d.attack_vector); break;
            case EntityKind::PackageName: break;
        }
    };

    std::vector<Mention> carried;  // packages of the previous sentence chain
    std::optional<std::size_t> carried_block;
    for (std::size_t si = 0; si < segments.size(); ++si) {
        auto& sm = per[si];
        const auto& seg = segments[si];
        for (const auto& p : sm.packages) {
            draft_for(p.value);
            auto& v = eco_votes[lower(p.value)];
            if (sm.row_eco) (*sm.row_eco == "NPM" ? v.first : v.second) += 100;
            v.first += sm.npm;
            v.second += sm.pypi;
        }
        std::vector<Mention> targets = sm.packages;
        if (targets.empty()) {
            const bool chain = !carried.empty() && (si > 0 && (per[si - 1].packages.size() || carried_block == seg.block));
            if (chain) {
                targets = carried;
                for (auto& t : targets) t.pos = 0;
            }
        }
        if (targets.empty()) {
            if (!sm.others.empty()) {
                if (names.size() == 1) {
                    targets.push_back({EntityKind::PackageName, names.front(), 0});
                } else {
                    for (const auto& m : sm.others)
                        log::debug("relate: no package for " + to_string(m.kind) + " '" + m.value + "' on " + doc.url);
                    continue;
                }
            } else {
                continue;
            }
        }
        for (const auto& m : sm.others) {
            if (m.kind == EntityKind::Version && !sm.packages.empty()) {
                const Mention* best = nullptr;
                std::size_t best_d = 0;
                for (const auto& p : targets) {
                    const std::size_t d = p.pos > m.pos ? p.pos - m.pos : m.pos - p.pos;
                    const bool better = !best || d < best_d || (d == best_d && p.pos < m.pos && best->pos > m.pos);
                    if (better) {
                        best = &p;
                        best_d = d;
                    }
                }
                attach(draft_for(best->value), m);
            } else if (m.kind == EntityKind::Version) {
                attach(draft_for(targets.back().value), m);
            } else {
                for (const auto& p : targets) attach(draft_for(p.value), m);
            }
        }
        if (!sm.packages.empty()) {
            carried = sm.packages;
            carried_block = seg.block;
        }
    }

    int doc_npm = 0, doc_pypi = 0;
    for (const auto& sm : per) {
        doc_npm += sm.npm;
        doc_pypi += sm.pypi;
    }
    for (auto& d : drafts) {
        if (d.package_name.front() == '@') {
            d.ecosystem = "NPM";
            continue;
        }
        auto [n, p] = eco_votes[lower(d.package_name)];
        if (n == p) {
            n = doc_npm;
            p = doc_pypi;
        }
        if (n > p) d.ecosystem = "NPM";
        else if (p > n) d.ecosystem = "PyPI";
    }
    return drafts;
}

std::vector<RecordDraft> DeterministicBackend::verify_drafts(const std::vector<RecordDraft>& drafts,
                                                             const PageDocument& doc) const {
    const std::string text = analysis_text(doc);
    std::vector<RecordDraft> out;
    auto check = [&](OptString& field) {
        if (field && !str::icontains(text, *field)) field.reset();
    };
    for (auto d : drafts) {
        if (!contains_word(text, d.package_name)) {
            log::info("verify: '" + d.package_name + "' not in text of " + doc.url);
            continue;
        }
        std::vector<std::string> versions;
        for (const auto& v : d.version)
            if (contains_version(text, v)) versions.push_back(v);
        d.version = std::move(versions);
        std::vector<std::string> iocs;
        for (const auto& c : d.ioc)
            if (str::icontains(text, c)) iocs.push_back(c);
        d.ioc = std::move(iocs);
        check(d.discovery_date);
        check(d.repository_url);
        check(d.attack_method);
        check(d.discoverer);
        check(d.impacted_systems);
        check(d.attack_vector);
        out.push_back(std::move(d));
    }
    return out;
}

BackendReply DeterministicBackend::extract(const std::string& prompt, const PageDocument& doc,
                                           const std::set<std::string>& candidates) {
    auto text = reply_for(to_json(extract_entities(doc, candidates)));
    return {text, word_count(prompt), word_count(text)};
}

BackendReply DeterministicBackend::relate(const std::string& prompt, const EntitySet& entities,
                                          const PageDocument& doc) {
    auto text = reply_for(drafts_to_json(relate_entities(entities, doc)));
    return {text, word_count(prompt), word_count(text)};
}

BackendReply DeterministicBackend::verify(const std::string& prompt, const std::vector<RecordDraft>& drafts,
                                          const PageDocument& doc) {
    auto text = reply_for(drafts_to_json(verify_drafts(drafts, doc)));
    return {text, word_count(prompt), word_count(text)};
}

}  // namespace pkgintel
