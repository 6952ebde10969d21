#pragma once

// Stage schemas of the three-step extraction: the flat entity inventory and the
// package-centred drafts.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pkgintel/core.hpp"

namespace pkgintel {

enum class EntityKind {
    PackageName,
    Version,
    DiscoveryDate,
    RepositoryUrl,
    AttackMethod,
    Discoverer,
    ImpactedSystems,
    AttackVector,
    Ioc,
};

inline constexpr std::size_t kEntityKindCount = 9;
const std::array<EntityKind, kEntityKindCount>& all_entity_kinds();
/// snake_case schema key ("package_name", ...).
std::string to_string(EntityKind kind);
std::optional<EntityKind> parse_entity_kind(std::string_view key);

/// Per-kind value lists, first-occurrence order, no duplicates, no blanks.
class EntitySet {
public:
    const std::vector<std::string>& values(EntityKind kind) const { return values_[index(kind)]; }
    /// Trims; ignores blanks and exact duplicates. Returns true when inserted.
    bool add(EntityKind kind, std::string_view value);
    void set(EntityKind kind, std::vector<std::string> values);
    bool empty() const;
    const std::vector<std::string>& package_names() const { return values(EntityKind::PackageName); }

    bool operator==(const EntitySet&) const = default;

private:
    static std::size_t index(EntityKind k) { return static_cast<std::size_t>(k); }
    std::array<std::vector<std::string>, kEntityKindCount> values_;
};

/// Object with all nine keys, each an array of strings.
OrderedJson to_json(const EntitySet& e);
/// Missing keys read as empty. Throws Error(Schema) on unknown keys or non-string values.
EntitySet entity_set_from_json(const Json& j);

struct RecordDraft {
    std::string package_name;
    std::vector<std::string> version;
    OptString discovery_date;
    OptString repository_url;
    OptString attack_method;
    OptString discoverer;
    OptString impacted_systems;
    OptString attack_vector;
    std::vector<std::string> ioc;
    /// "PyPI"/"NPM" when the text says which registry; null otherwise.
    OptString ecosystem;
    /// Set locally when verification could not be completed; not part of the wire schema.
    bool unverified = false;

    bool operator==(const RecordDraft&) const = default;
};

OrderedJson to_json(const RecordDraft& d);
/// {"packages": [...]}
OrderedJson drafts_to_json(const std::vector<RecordDraft>& drafts);
/// Accepts {"packages": [...]} or a bare array. Throws Error(Schema) on any violation:
/// missing/blank package_name, wrong value types, unknown keys.
std::vector<RecordDraft> drafts_from_json(const Json& j);

/// Parses model output that may be wrapped in a ``` fence or surrounded by prose.
/// Throws Error(Schema) when no JSON value can be recovered.
Json parse_reply_json(std::string_view reply);

}  // namespace pkgintel
