#include "drillex/dataset.hpp"

#include "drillex/errors.hpp"

#include <algorithm>

namespace drillex {

Dataset Dataset::from_table(const Table &table, DatasetSchema schema)
{
    schema.check();
    Dataset ds;
    ds.num_rows_ = table.rows.size();

    for (const auto &h : schema.hierarchies)
        for (const auto &a : h.attributes) table.column(a);
    for (const auto &m : schema.measures) table.column(m);

    auto violations = validate(table, schema);
    if (!violations.empty()) {
        const auto &v = violations.front();
        if (v.parents.empty())
            throw SchemaError("empty value for hierarchy attribute '" + v.attribute + "'");
        std::string msg = "functional dependency violated: " + v.attribute + "=" + v.child + " has parents";
        for (const auto &p : v.parents) msg += " " + p;
        throw FDViolationError(msg);
    }

    ds.dicts_.resize(schema.hierarchies.size());
    ds.codes_.resize(schema.hierarchies.size());
    ds.paths_.resize(schema.hierarchies.size());
    for (std::size_t h = 0; h < schema.hierarchies.size(); ++h) {
        const auto &attrs = schema.hierarchies[h].attributes;
        for (const auto &a : attrs) {
            const std::size_t col = table.column(a);
            std::vector<std::string> values;
            values.reserve(table.rows.size());
            for (const auto &row : table.rows) values.push_back(row[col]);
            Dictionary dict(std::move(values));
            std::vector<ValueId> codes;
            codes.reserve(table.rows.size());
            for (const auto &row : table.rows) codes.push_back(*dict.find(row[col]));
            ds.dicts_[h].push_back(std::move(dict));
            ds.codes_[h].push_back(std::move(codes));
        }
        auto &paths = ds.paths_[h];
        paths.reserve(table.rows.size());
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            std::vector<ValueId> p(attrs.size());
            for (std::size_t l = 0; l < attrs.size(); ++l) p[l] = ds.codes_[h][l][r];
            paths.push_back(std::move(p));
        }
        std::sort(paths.begin(), paths.end());
        paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    }

    for (const auto &m : schema.measures) {
        const std::size_t col = table.column(m);
        std::vector<double> values;
        values.reserve(table.rows.size());
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            auto v = parse_number(table.rows[r][col]);
            if (!v) throw ParseError("row " + std::to_string(r + 1) + ": measure '" + m + "' is not numeric");
            values.push_back(*v);
        }
        ds.measures_.push_back(std::move(values));
    }
    ds.schema_ = std::move(schema);
    ds.raw_ = table;
    return ds;
}

const std::vector<double> &Dataset::measure(const std::string &name) const
{
    for (std::size_t i = 0; i < schema_.measures.size(); ++i)
        if (schema_.measures[i] == name) return measures_[i];
    throw MissingColumn("unknown measure '" + name + "'");
}

} // namespace drillex
