#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pkgintel/core.hpp"

namespace pkgintel {

enum class BlockKind { Paragraph, Code, Heading1, Heading2, Heading3, Table, List, IframeCsv };

std::string to_string(BlockKind kind);
BlockKind parse_block_kind(std::string_view text);

using Cells = std::vector<std::vector<std::string>>;

struct Block {
    BlockKind kind = BlockKind::Paragraph;
    std::string text;
    /// Row-major, rectangular; present for Table and IframeCsv only.
    std::optional<Cells> cells;

    bool operator==(const Block&) const = default;
    bool is_tabular() const { return kind == BlockKind::Table || kind == BlockKind::IframeCsv; }
};

struct PageDocument {
    std::string url;
    std::string source_id;
    Timestamp fetched_at;
    /// From article metadata when the page declares it.
    std::optional<Timestamp> published_at;
    std::string raw_markup;
    std::vector<Block> blocks;

    bool operator==(const PageDocument&) const = default;
    /// published_at, falling back to fetched_at.
    Timestamp effective_published() const { return published_at.value_or(fetched_at); }
};

/// Concatenated block text, one block per line group ("\n" separated).
std::string document_text(const PageDocument& doc);

OrderedJson to_json(const Block& b);
Block block_from_json(const Json& j);
/// Blocks included; raw markup only when `with_markup`.
OrderedJson to_json(const PageDocument& doc, bool with_markup = false);
PageDocument page_from_json(const Json& j);

}  // namespace pkgintel
