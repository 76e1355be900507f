#pragma once

#include "drillex/table.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace drillex {

/// Ordered attribute list of one dimension, least to most specific. Each attribute
/// functionally determines all attributes before it.
struct Hierarchy
{
    std::string name;
    std::vector<std::string> attributes;
};

/// Location of an attribute inside a schema.
struct AttributeRef
{
    std::size_t hierarchy = 0;
    std::size_t level = 0;
};

struct DatasetSchema
{
    std::vector<Hierarchy> hierarchies; ///< declaration order is the canonical order
    std::vector<std::string> measures;

    /// Throws SchemaError on empty hierarchies, duplicate names or group-by/measure overlap.
    void check() const;

    std::size_t hierarchy_index(const std::string &name) const; ///< throws UnknownHierarchy
    AttributeRef locate(const std::string &attribute) const;     ///< throws UnknownAttribute
    std::optional<AttributeRef> find(const std::string &attribute) const;
};

enum class StatKind { Count, Mean, Sum, Std };

const char *to_string(StatKind kind);
StatKind stat_kind_from_string(const std::string &s); ///< throws InvalidComplaint

/// Conjunction of attribute = value predicates.
using Filter = std::map<std::string, std::string>;

/// Group key: group-by attribute -> value.
using GroupKey = std::map<std::string, std::string>;

/// A view γ_{groupby, stats(measure)}(σ_filter R).  The group-by is encoded as a depth per
/// hierarchy: the first `depth[h]` attributes of hierarchy h are grouped on.
struct ViewSpec
{
    std::vector<std::size_t> depth;
    Filter filter;
    std::string measure;
    std::vector<StatKind> aggregates{StatKind::Count, StatKind::Mean, StatKind::Sum, StatKind::Std};

    static ViewSpec root(const DatasetSchema &schema, std::string measure);

    std::vector<std::string> groupby(const DatasetSchema &schema) const;
    bool has_remaining_depth(const DatasetSchema &schema, std::size_t hierarchy) const;
    /// Throws SchemaError if the filter binds an attribute below the group-by depth.
    void check(const DatasetSchema &schema) const;
};

/// Adds the next attribute of `hierarchy` to the group-by and restricts the view to the
/// provenance of `tuple`.  Throws AtLeafLevel when the hierarchy is exhausted.
ViewSpec drilldown(const DatasetSchema &schema, const ViewSpec &view, const GroupKey &tuple,
                   const std::string &hierarchy);

/// Column order of a feature matrix: hierarchy blocks in declaration order with the drilled
/// hierarchy moved last, each block least to most specific.
struct AttributeOrder
{
    std::vector<std::size_t> hierarchies; ///< hierarchy indices, block order
    std::vector<std::string> attributes;
    std::vector<AttributeRef> refs; ///< parallel to `attributes`
};

/// Orders all schema attributes; with `depth` given, only the grouped prefix of each
/// hierarchy is included and hierarchies at depth 0 are skipped.
AttributeOrder attribute_order(const DatasetSchema &schema, const std::string &drilldown_hierarchy,
                               const std::vector<std::size_t> *depth = nullptr);

struct FDViolation
{
    std::string attribute;
    std::string child;
    std::vector<std::string> parents;
};

/// Checks every hierarchy level for the functional dependency child -> parent. Rows with an
/// empty hierarchy value are reported with an empty `parents` list.
std::vector<FDViolation> validate(const Table &rows, const DatasetSchema &schema);

} // namespace drillex
