#include "drillex/schema.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace drillex {

void DatasetSchema::check() const
{
    std::set<std::string> seen;
    std::set<std::string> hnames;
    for (const auto &h : hierarchies) {
        if (h.attributes.empty()) throw SchemaError("hierarchy '" + h.name + "' has no attributes");
        if (!hnames.insert(h.name).second) throw SchemaError("duplicate hierarchy '" + h.name + "'");
        for (const auto &a : h.attributes)
            if (!seen.insert(a).second) throw SchemaError("attribute '" + a + "' declared twice");
    }
    for (const auto &m : measures)
        if (seen.count(m)) throw SchemaError("'" + m + "' is both a hierarchy attribute and a measure");
}

std::size_t DatasetSchema::hierarchy_index(const std::string &name) const
{
    for (std::size_t i = 0; i < hierarchies.size(); ++i)
        if (hierarchies[i].name == name) return i;
    throw UnknownHierarchy("unknown hierarchy '" + name + "'");
}

std::optional<AttributeRef> DatasetSchema::find(const std::string &attribute) const
{
    for (std::size_t h = 0; h < hierarchies.size(); ++h) {
        const auto &attrs = hierarchies[h].attributes;
        for (std::size_t l = 0; l < attrs.size(); ++l)
            if (attrs[l] == attribute) return AttributeRef{h, l};
    }
    return std::nullopt;
}

AttributeRef DatasetSchema::locate(const std::string &attribute) const
{
    if (auto r = find(attribute)) return *r;
    throw UnknownAttribute("unknown attribute '" + attribute + "'");
}

const char *to_string(StatKind kind)
{
    switch (kind) {
        case StatKind::Count: return "COUNT";
        case StatKind::Mean: return "MEAN";
        case StatKind::Sum: return "SUM";
        case StatKind::Std: return "STD";
    }
    return "?";
}

StatKind stat_kind_from_string(const std::string &s)
{
    std::string u(s);
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "COUNT") return StatKind::Count;
    if (u == "MEAN" || u == "AVG") return StatKind::Mean;
    if (u == "SUM") return StatKind::Sum;
    if (u == "STD" || u == "STDDEV") return StatKind::Std;
    throw InvalidComplaint("unknown statistic '" + s + "'");
}

ViewSpec ViewSpec::root(const DatasetSchema &schema, std::string measure)
{
    ViewSpec v;
    v.depth.assign(schema.hierarchies.size(), 0);
    v.measure = std::move(measure);
    return v;
}

std::vector<std::string> ViewSpec::groupby(const DatasetSchema &schema) const
{
    std::vector<std::string> out;
    for (std::size_t h = 0; h < schema.hierarchies.size(); ++h)
        for (std::size_t l = 0; l < depth.at(h); ++l) out.push_back(schema.hierarchies[h].attributes[l]);
    return out;
}

bool ViewSpec::has_remaining_depth(const DatasetSchema &schema, std::size_t hierarchy) const
{
    return depth.at(hierarchy) < schema.hierarchies.at(hierarchy).attributes.size();
}

void ViewSpec::check(const DatasetSchema &schema) const
{
    if (depth.size() != schema.hierarchies.size()) throw SchemaError("view depth does not match schema");
    for (std::size_t h = 0; h < depth.size(); ++h)
        if (depth[h] > schema.hierarchies[h].attributes.size())
            throw SchemaError("view depth exceeds hierarchy '" + schema.hierarchies[h].name + "'");
    for (const auto &[attr, value] : filter) {
        auto ref = schema.locate(attr);
        if (ref.level >= depth[ref.hierarchy])
            throw SchemaError("filter binds '" + attr + "' below the group-by depth");
    }
}

ViewSpec drilldown(const DatasetSchema &schema, const ViewSpec &view, const GroupKey &tuple,
                   const std::string &hierarchy)
{
    const std::size_t h = schema.hierarchy_index(hierarchy);
    if (!view.has_remaining_depth(schema, h))
        throw AtLeafLevel("hierarchy '" + hierarchy + "' is already at its most specific attribute");
    ViewSpec next = view;
    for (const auto &attr : view.groupby(schema)) {
        auto it = tuple.find(attr);
        if (it == tuple.end()) throw SchemaError("drill-down tuple does not bind '" + attr + "'");
        next.filter[attr] = it->second;
    }
    next.depth[h] += 1;
    return next;
}

AttributeOrder attribute_order(const DatasetSchema &schema, const std::string &drilldown_hierarchy,
                               const std::vector<std::size_t> *depth)
{
    const std::size_t drilled = schema.hierarchy_index(drilldown_hierarchy);
    AttributeOrder order;
    for (std::size_t h = 0; h < schema.hierarchies.size(); ++h)
        if (h != drilled) order.hierarchies.push_back(h);
    order.hierarchies.push_back(drilled);
    for (std::size_t h : order.hierarchies) {
        const auto &attrs = schema.hierarchies[h].attributes;
        const std::size_t limit = depth ? std::min(depth->at(h), attrs.size()) : attrs.size();
        for (std::size_t l = 0; l < limit; ++l) {
            order.attributes.push_back(attrs[l]);
            order.refs.push_back({h, l});
        }
    }
    if (depth) {
        std::erase_if(order.hierarchies, [&](std::size_t h) { return depth->at(h) == 0; });
    }
    return order;
}

std::vector<FDViolation> validate(const Table &rows, const DatasetSchema &schema)
{
    std::vector<FDViolation> out;
    for (const auto &h : schema.hierarchies) {
        std::vector<std::size_t> cols;
        for (const auto &a : h.attributes) cols.push_back(rows.column(a));
        for (const auto &row : rows.rows)
            for (std::size_t l = 0; l < cols.size(); ++l)
                if (row[cols[l]].empty()) {
                    out.push_back({h.attributes[l], "", {}});
                    return out;
                }
        // adjacent levels only
        for (std::size_t l = 1; l < cols.size(); ++l) {
            std::unordered_map<std::string, std::set<std::string>> parents;
            for (const auto &row : rows.rows) parents[row[cols[l]]].insert(row[cols[l - 1]]);
            std::vector<FDViolation> level;
            for (auto &[child, ps] : parents)
                if (ps.size() > 1)
                    level.push_back({h.attributes[l], child, std::vector<std::string>(ps.begin(), ps.end())});
            std::sort(level.begin(), level.end(),
                      [](const FDViolation &a, const FDViolation &b) { return a.child < b.child; });
            out.insert(out.end(), level.begin(), level.end());
        }
    }
    return out;
}

} // namespace drillex
