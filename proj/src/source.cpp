#include "pkgintel/source.hpp"

#include <array>
#include <fstream>

#include "pkgintel/strings.hpp"
#include "pkgintel/url.hpp"

namespace pkgintel {

std::string to_string(SourceCategory c) {
    switch (c) {
        case SourceCategory::DeveloperCommunity: return "developer_community";
        case SourceCategory::SocialMedia: return "social_media";
        case SourceCategory::SecurityCompany: return "security_company";
        case SourceCategory::AcademicResearch: return "academic_research";
        case SourceCategory::Other: return "other";
    }
    return "other";
}

std::string to_string(SourceKind k) { return k == SourceKind::Structured ? "structured" : "unstructured"; }

std::string to_string(SourceStatus s) {
    switch (s) {
        case SourceStatus::Candidate: return "candidate";
        case SourceStatus::Approved: return "approved";
        case SourceStatus::Rejected: return "rejected";
        case SourceStatus::Reprint: return "reprint";
    }
    return "candidate";
}

SourceCategory parse_source_category(std::string_view text) {
    for (auto c : {SourceCategory::DeveloperCommunity, SourceCategory::SocialMedia, SourceCategory::SecurityCompany,
                   SourceCategory::AcademicResearch, SourceCategory::Other})
        if (to_string(c) == text) return c;
    throw Error(ErrorKind::Parse, "unknown source category: " + std::string(text));
}

SourceKind parse_source_kind(std::string_view text) {
    if (text == "structured") return SourceKind::Structured;
    if (text == "unstructured") return SourceKind::Unstructured;
    throw Error(ErrorKind::Parse, "unknown source kind: " + std::string(text));
}

SourceStatus parse_source_status(std::string_view text) {
    for (auto s : {SourceStatus::Candidate, SourceStatus::Approved, SourceStatus::Rejected, SourceStatus::Reprint})
        if (to_string(s) == text) return s;
    throw Error(ErrorKind::Parse, "unknown source status: " + std::string(text));
}

void validate(const SourceDescriptor& s) {
    auto bad = [&](const std::string& m) { return Error(ErrorKind::InvalidArgument, "source " + s.source_id + ": " + m); };
    if (s.source_id.empty()) throw bad("empty source_id");
    if (s.domain.empty() || s.domain.find_first_of("/:?# ") != std::string::npos)
        throw bad("domain must be a bare registrable domain: '" + s.domain + "'");
    if (s.domain != normalize_domain(s.domain)) throw bad("domain not normalized: " + s.domain);
    if (s.status == SourceStatus::Approved && s.collection_tags.empty()) throw bad("approved source has no collection tags");
    s.crawl_policy.validate();
}

OrderedJson to_json(const SourceDescriptor& s) {
    OrderedJson j;
    j["source_id"] = s.source_id;
    j["domain"] = s.domain;
    j["category"] = to_string(s.category);
    j["kind"] = to_string(s.kind);
    j["collection_tags"] = s.collection_tags;
    j["crawl_policy"] = to_json(s.crawl_policy);
    j["status"] = to_string(s.status);
    j["seed_urls"] = s.seed_urls;
    if (!s.note.empty()) j["note"] = s.note;
    return j;
}

SourceDescriptor source_from_json(const Json& j) {
    try {
        SourceDescriptor s;
        s.source_id = j.at("source_id").get<std::string>();
        s.domain = j.at("domain").get<std::string>();
        s.category = parse_source_category(j.value("category", "other"));
        s.kind = parse_source_kind(j.value("kind", "unstructured"));
        if (j.contains("collection_tags")) s.collection_tags = j.at("collection_tags").get<std::set<std::string>>();
        if (j.contains("crawl_policy")) s.crawl_policy = crawl_policy_from_json(j.at("crawl_policy"));
        s.status = parse_source_status(j.value("status", "candidate"));
        if (j.contains("seed_urls")) s.seed_urls = j.at("seed_urls").get<std::vector<std::string>>();
        s.note = j.value("note", "");
        return s;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed source descriptor: ") + e.what());
    }
}

std::vector<SourceDescriptor> read_sources_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
    std::vector<SourceDescriptor> out;
    std::string line;
    while (std::getline(in, line)) {
        if (str::trim(line).empty()) continue;
        try {
            out.push_back(source_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw Error(ErrorKind::Parse, path + ": " + e.what());
        }
    }
    return out;
}

void write_sources_jsonl(const std::string& path, const std::vector<SourceDescriptor>& sources) {
    std::string body;
    for (const auto& s : sources) body += to_json(s).dump() + "\n";
    write_file_atomic(path, body);
}

namespace {

struct KnownDomain {
    std::string_view domain;
    SourceCategory category;
};

constexpr std::array<KnownDomain, 32> kKnown{{
    {"twitter.com", SourceCategory::SocialMedia},         {"x.com", SourceCategory::SocialMedia},
    {"mastodon.social", SourceCategory::SocialMedia},     {"linkedin.com", SourceCategory::SocialMedia},
    {"reddit.com", SourceCategory::SocialMedia},          {"news.ycombinator.com", SourceCategory::SocialMedia},
    {"medium.com", SourceCategory::DeveloperCommunity},   {"dev.to", SourceCategory::DeveloperCommunity},
    {"github.com", SourceCategory::DeveloperCommunity},   {"stackoverflow.com", SourceCategory::DeveloperCommunity},
    {"gitlab.com", SourceCategory::DeveloperCommunity},   {"discuss.python.org", SourceCategory::DeveloperCommunity},
    {"phylum.io", SourceCategory::SecurityCompany},       {"blog.phylum.io", SourceCategory::SecurityCompany},
    {"snyk.io", SourceCategory::SecurityCompany},         {"security.snyk.io", SourceCategory::SecurityCompany},
    {"jfrog.com", SourceCategory::SecurityCompany},       {"sonatype.com", SourceCategory::SecurityCompany},
    {"blog.sonatype.com", SourceCategory::SecurityCompany}, {"checkmarx.com", SourceCategory::SecurityCompany},
    {"socket.dev", SourceCategory::SecurityCompany},      {"fortinet.com", SourceCategory::SecurityCompany},
    {"securitylabs.datadoghq.com", SourceCategory::SecurityCompany}, {"datadoghq.com", SourceCategory::SecurityCompany},
    {"checkpoint.com", SourceCategory::SecurityCompany},  {"tuxcare.com", SourceCategory::SecurityCompany},
    {"securityaffairs.com", SourceCategory::SecurityCompany}, {"qianxin.com", SourceCategory::SecurityCompany},
    {"arxiv.org", SourceCategory::AcademicResearch},      {"dl.acm.org", SourceCategory::AcademicResearch},
    {"ieeexplore.ieee.org", SourceCategory::AcademicResearch}, {"usenix.org", SourceCategory::AcademicResearch},
}};

}  // namespace

SourceCategory categorize_domain(std::string_view domain) {
    const std::string d = normalize_domain(domain);
    for (const auto& k : kKnown) {
        if (d == k.domain) return k.category;
        if (d.size() > k.domain.size() && d.ends_with(k.domain) && d[d.size() - k.domain.size() - 1] == '.')
            return k.category;
    }
    if (d.ends_with(".edu") || d.ends_with(".ac.uk") || d.find(".edu.") != std::string::npos)
        return SourceCategory::AcademicResearch;
    return SourceCategory::Other;
}

}  // namespace pkgintel
