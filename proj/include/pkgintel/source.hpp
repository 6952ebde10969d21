#pragma once

#include <set>
#include <string>
#include <vector>

#include "pkgintel/core.hpp"
#include "pkgintel/http.hpp"

namespace pkgintel {

enum class SourceCategory { DeveloperCommunity, SocialMedia, SecurityCompany, AcademicResearch, Other };
enum class SourceKind { Structured, Unstructured };
enum class SourceStatus { Candidate, Approved, Rejected, Reprint };

std::string to_string(SourceCategory c);
std::string to_string(SourceKind k);
std::string to_string(SourceStatus s);
SourceCategory parse_source_category(std::string_view text);
SourceKind parse_source_kind(std::string_view text);
SourceStatus parse_source_status(std::string_view text);

struct SourceDescriptor {
    std::string source_id;
    /// Registrable domain, no scheme or path.
    std::string domain;
    SourceCategory category = SourceCategory::Other;
    SourceKind kind = SourceKind::Unstructured;
    std::set<std::string> collection_tags;
    CrawlPolicy crawl_policy;
    SourceStatus status = SourceStatus::Candidate;
    /// Index pages the collector starts from.
    std::vector<std::string> seed_urls;
    /// Optional reviewer note, e.g. which page a reprint copies.
    std::string note;

    bool operator==(const SourceDescriptor& o) const {
        return source_id == o.source_id && domain == o.domain && category == o.category && kind == o.kind &&
               collection_tags == o.collection_tags && status == o.status && seed_urls == o.seed_urls &&
               note == o.note;
    }
};

/// Throws Error(InvalidArgument) on a bad domain or an approved source without tags.
void validate(const SourceDescriptor& s);

OrderedJson to_json(const SourceDescriptor& s);
SourceDescriptor source_from_json(const Json& j);

std::vector<SourceDescriptor> read_sources_jsonl(const std::string& path);
void write_sources_jsonl(const std::string& path, const std::vector<SourceDescriptor>& sources);

/// Qualitative category for a domain from a bundled table of well-known sites.
SourceCategory categorize_domain(std::string_view domain);

}  // namespace pkgintel
