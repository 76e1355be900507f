#include "drillex/table.hpp"

#include "drillex/errors.hpp"

#include <fstream>
#include <ostream>

namespace drillex {

std::size_t Table::column(const std::string &name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw MissingColumn("column '" + name + "' not found");
}

bool Table::has_column(const std::string &name) const
{
    for (const auto &h : header)
        if (h == name) return true;
    return false;
}

namespace {

// Returns false at end of input. Handles quoted fields spanning newlines.
bool read_record(std::istream &in, std::vector<std::string> &out, std::size_t line)
{
    out.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (;; c = in.get()) {
        if (quoted) {
            if (c == EOF) throw ParseError("unterminated quote near line " + std::to_string(line));
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == EOF) {
            out.push_back(std::move(field));
            return true;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            out.push_back(std::move(field));
            return true;
        } else {
            field.push_back(static_cast<char>(c));
            field_started = true;
        }
    }
}

bool needs_quotes(const std::string &s)
{
    return s.find_first_of(",\"\r\n") != std::string::npos;
}

} // namespace

Table read_csv(std::istream &in)
{
    Table t;
    std::vector<std::string> record;
    std::size_t line = 1;
    if (!read_record(in, t.header, line)) throw ParseError("empty CSV input");
    if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
    while (read_record(in, record, ++line)) {
        if (record.size() == 1 && record[0].empty()) continue;
        if (record.size() != t.header.size())
            throw ParseError("line " + std::to_string(line) + ": expected " +
                             std::to_string(t.header.size()) + " fields, got " +
                             std::to_string(record.size()));
        t.rows.push_back(record);
    }
    return t;
}

Table read_csv_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv(std::ostream &out, const Table &table)
{
    auto put = [&out](const std::vector<std::string> &rec) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i) out << ',';
            if (needs_quotes(rec[i])) {
                out << '"';
                for (char c : rec[i]) {
                    if (c == '"') out << '"';
                    out << c;
                }
                out << '"';
            } else {
                out << rec[i];
            }
        }
        out << '\n';
    };
    put(table.header);
    for (const auto &r : table.rows) put(r);
}

} // namespace drillex
