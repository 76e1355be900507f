#pragma once

#include <istream>
#include <string>
#include <vector>

namespace drillex {

/// Raw string table as read from a CSV file: a header plus rows of equal width.
struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position of `name`; throws MissingColumn.
    std::size_t column(const std::string &name) const;
    bool has_column(const std::string &name) const;
};

/// Reads RFC 4180 style CSV (header row, quoted fields, `""` escapes). Throws ParseError.
Table read_csv(std::istream &in);
Table read_csv_file(const std::string &path);

void write_csv(std::ostream &out, const Table &table);

} // namespace drillex
