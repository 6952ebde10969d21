#pragma once

// A small forgiving HTML tree builder. It is not a conforming HTML5 parser; it
// understands enough of the tree-construction rules (void elements, raw-text
// elements, implied end tags for p/li/td/tr) to recover the structure of
// ordinary article and index pages.

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pkgintel::html {

struct Node {
    enum class Type { Document, Element, Text };

    Type type = Type::Element;
    std::string tag;  // lowercase, elements only
    std::vector<std::pair<std::string, std::string>> attrs;
    std::string text;  // decoded, text nodes only
    std::vector<Node> children;

    bool is_element(std::string_view name) const { return type == Type::Element && tag == name; }
    /// nullptr when absent. Attribute names are lowercase.
    const std::string* attr(std::string_view name) const;
    bool has_class(std::string_view cls) const;
};

struct Document {
    Node root;
    std::vector<std::string> warnings;
};

Document parse(std::string_view markup);

std::string decode_entities(std::string_view text);

/// Visible text of `node` and its descendants. Block boundaries and <br> become
/// newlines; runs of blanks inside a line are collapsed.
std::string text_content(const Node& node);

/// Pre-order walk. The callback gets the node and the chain of ancestor elements
/// (outermost first) and returns false to skip the node's subtree.
using Visitor = std::function<bool(const Node&, const std::vector<const Node*>& ancestors)>;
void walk(const Node& root, const Visitor& visit);

/// Elements whose content is never visible text.
bool is_non_content(std::string_view tag);
bool is_block_level(std::string_view tag);

}  // namespace pkgintel::html
