#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pkgintel::csv {

using Row = std::vector<std::string>;
using Table = std::vector<Row>;

/// RFC 4180: quoted fields, doubled quotes, CRLF or LF records. Blank lines are skipped.
Table parse(std::string_view text);

/// Pads short rows with empty cells so every row has the widest row's length.
void make_rectangular(Table& table);

std::string escape_field(std::string_view field);
std::string format_row(const Row& row);

}  // namespace pkgintel::csv
