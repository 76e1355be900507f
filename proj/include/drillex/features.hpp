#pragma once

#include "drillex/dataset.hpp"
#include "drillex/factorizer.hpp"
#include "drillex/stats.hpp"
#include "drillex/table.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace drillex {

/// Statistics of every logical row (group) of `store` over the fact rows matching all of
/// `filter`, in row order.  Groups without fact rows get an empty bundle.
std::vector<StatBundle> group_stats(const Dataset &data, const FactorStore &store, const Filter &filter,
                                    const std::string &measure);

/// Primitive statistic a model is trained on.
enum class ModelTarget { Count, Mean };

const char *to_string(ModelTarget t);

/// Training target: y per row and which rows take part.  Empty groups are y = 0 for COUNT
/// models and excluded for MEAN models.
struct TrainingTarget
{
    std::vector<double> y;
    std::vector<std::uint8_t> included;
};

TrainingTarget make_target(const std::vector<StatBundle> &stats, ModelTarget target);

enum class FeatureKind { Intercept, Default, Auxiliary, Custom };

const char *to_string(FeatureKind k);

/** Feature column defined on one attribute: a real value for every value of the attribute in the
 * store (indexed by the attribute's position order). */
struct FeatureMap
{
    std::string name;
    std::string attribute;
    FeatureKind kind = FeatureKind::Default;
    std::vector<double> values;

    /// Value -> feature, for reporting.
    std::map<std::string, double> by_value(const FactorStore &store) const;
};

/// Constant 1 on the store's first attribute.
FeatureMap intercept_feature(const FactorStore &store);

/// Median of the target over the included rows, per value of `attribute`.  Values without an
/// included row throw NoGroups, or get the global median when `impute` is set.
FeatureMap default_feature_map(const FactorStore &store, const std::string &attribute, const TrainingTarget &target,
                               bool impute = false);

/// True if every value of `attribute` occurs in at most one included row, so its default feature
/// would reproduce the target.
bool determines_rows(const FactorStore &store, const std::string &attribute, const TrainingTarget &target);

/// Joined dataset with one numeric measure, keyed by attributes of one hierarchy.
struct AuxiliarySpec
{
    std::string name;
    Table table;
    std::vector<std::string> join_attributes;
    std::string measure;
};

/// Throws MissingColumn, ParseError, SchemaError (duplicate key).
void check_auxiliary(const AuxiliarySpec &spec, const DatasetSchema &schema);

/// Auxiliary measure per value of the deepest join attribute, centered and scaled to unit
/// sample deviation.  Keys absent from the table get the measure's global median.  nullopt
/// when some join attribute is not grouped in `store`.
std::optional<FeatureMap> auxiliary_feature_map(const AuxiliarySpec &spec, const FactorStore &store);

/// q(value, per-value statistic) for every value of `attribute`; the per-value statistic is the
/// imputed default feature.  Throws NonFinite.
using CustomFn = std::function<double(const std::string &value, const std::map<std::string, double> &stat)>;
FeatureMap custom_feature(const FactorStore &store, const std::string &attribute, const std::string &name,
                          const CustomFn &fn, const TrainingTarget &target);

/// Built-in custom features: "identity" and "lag-<k>" (statistic of the value numerically k lower).
CustomFn builtin_custom(const std::string &name);

/** Logical feature matrix: the store's attribute matrix with each attribute value replaced by
 * its features.  Never materialized by the engine. */
struct FeatureMatrixView
{
    const FactorStore *store = nullptr;
    std::vector<FeatureMap> columns;
    std::vector<std::size_t> column_attr; ///< attribute index of each column
    std::vector<double> y;
    std::vector<std::uint8_t> included; ///< empty means all rows
    std::vector<bool> z_mask;

    std::uint64_t num_rows() const { return store->num_rows(); }
    std::size_t num_columns() const { return columns.size(); }
    std::vector<std::size_t> z_columns() const;
    bool all_included() const { return included.empty(); }
    bool is_included(std::uint64_t row) const { return included.empty() || included[row] != 0; }
    std::uint64_t num_included() const;
    std::optional<std::size_t> find_column(const std::string &name) const;
};

/// Orders columns by attribute order.  Throws LengthMismatch (y, included or z_mask size,
/// feature map domain) and ShapeMismatch (no columns).
FeatureMatrixView build_view(const FactorStore &store, std::vector<FeatureMap> columns, std::vector<double> y,
                             std::vector<std::uint8_t> included = {}, std::vector<bool> z_mask = {});

/// z mask with every column except those named in `excluded`.
std::vector<bool> z_mask_excluding(const std::vector<FeatureMap> &columns, const std::set<std::string> &excluded);

double median(std::vector<double> v);

} // namespace drillex
