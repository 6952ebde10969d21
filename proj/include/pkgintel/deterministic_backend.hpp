#pragma once

// Rule-based analyzer: candidate names near package cue words, column-typed
// tables, regex recognizers for versions, dates, URLs and hashes, and
// segment-proximity attachment. No network; output is a pure function of input.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pkgintel/ltm.hpp"

namespace pkgintel {

/// One sentence, list item, table row or code block.
struct Segment {
    std::string text;
    std::size_t block = 0;
    BlockKind kind = BlockKind::Paragraph;
    /// Table rows under a typed header: values per column kind.
    bool typed_row = false;
    std::vector<std::pair<EntityKind, std::string>> cells;
    std::optional<std::string> row_ecosystem;
    /// The block right before this list/table mentions packages.
    bool inherits_cue = false;
};

std::vector<Segment> segment_document(const PageDocument& doc);

/// Header text to the entity kind its column holds; "ecosystem" columns are reported
/// through `is_ecosystem`.
std::optional<EntityKind> classify_header(std::string_view header, bool* is_ecosystem = nullptr);

class DeterministicBackend final : public AnalyzerBackend {
public:
    std::string name() const override { return "deterministic"; }

    BackendReply extract(const std::string& prompt, const PageDocument& doc,
                         const std::set<std::string>& candidates) override;
    BackendReply relate(const std::string& prompt, const EntitySet& entities, const PageDocument& doc) override;
    BackendReply verify(const std::string& prompt, const std::vector<RecordDraft>& drafts,
                        const PageDocument& doc) override;

    EntitySet extract_entities(const PageDocument& doc, const std::set<std::string>& candidates) const;
    std::vector<RecordDraft> relate_entities(const EntitySet& entities, const PageDocument& doc) const;
    /// Drops drafts whose name is absent from the text; removes field values that do
    /// not occur verbatim.
    std::vector<RecordDraft> verify_drafts(const std::vector<RecordDraft>& drafts, const PageDocument& doc) const;
};

}  // namespace pkgintel
