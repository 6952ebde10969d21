#include "pkgintel/page.hpp"

#include "pkgintel/strings.hpp"

namespace pkgintel {

std::string to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::Paragraph: return "paragraph";
        case BlockKind::Code: return "code";
        case BlockKind::Heading1: return "heading1";
        case BlockKind::Heading2: return "heading2";
        case BlockKind::Heading3: return "heading3";
        case BlockKind::Table: return "table";
        case BlockKind::List: return "list";
        case BlockKind::IframeCsv: return "iframe_csv";
    }
    return "paragraph";
}

BlockKind parse_block_kind(std::string_view text) {
    for (auto k : {BlockKind::Paragraph, BlockKind::Code, BlockKind::Heading1, BlockKind::Heading2,
                   BlockKind::Heading3, BlockKind::Table, BlockKind::List, BlockKind::IframeCsv})
        if (to_string(k) == text) return k;
    throw Error(ErrorKind::Parse, "unknown block kind: " + std::string(text));
}

std::string document_text(const PageDocument& doc) {
    std::string out;
    for (const auto& b : doc.blocks) {
        if (!out.empty()) out += '\n';
        out += b.text;
    }
    return out;
}

OrderedJson to_json(const Block& b) {
    OrderedJson j;
    j["kind"] = to_string(b.kind);
    j["text"] = b.text;
    if (b.cells) j["cells"] = *b.cells;
    return j;
}

Block block_from_json(const Json& j) {
    Block b;
    b.kind = parse_block_kind(j.at("kind").get<std::string>());
    b.text = j.at("text").get<std::string>();
    if (j.contains("cells")) b.cells = j.at("cells").get<Cells>();
    return b;
}

OrderedJson to_json(const PageDocument& doc, bool with_markup) {
    OrderedJson j;
    j["url"] = doc.url;
    j["source_id"] = doc.source_id;
    j["fetched_at"] = doc.fetched_at.to_iso();
    j["published_at"] = doc.published_at ? OrderedJson(doc.published_at->to_iso()) : OrderedJson(nullptr);
    OrderedJson blocks = OrderedJson::array();
    for (const auto& b : doc.blocks) blocks.push_back(to_json(b));
    j["blocks"] = std::move(blocks);
    if (with_markup) j["raw_markup"] = doc.raw_markup;
    return j;
}

PageDocument page_from_json(const Json& j) {
    PageDocument doc;
    doc.url = j.at("url").get<std::string>();
    doc.source_id = j.value("source_id", "");
    doc.fetched_at = Timestamp::parse_iso(j.at("fetched_at").get<std::string>());
    if (j.contains("published_at") && !j.at("published_at").is_null())
        doc.published_at = Timestamp::parse_iso(j.at("published_at").get<std::string>());
    if (j.contains("blocks"))
        for (const auto& b : j.at("blocks")) doc.blocks.push_back(block_from_json(b));
    doc.raw_markup = j.value("raw_markup", "");
    return doc;
}

}  // namespace pkgintel
