#include "drillex/features.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drillex {

std::vector<StatBundle> group_stats(const Dataset &data, const FactorStore &store, const Filter &filter,
                                    const std::string &measure)
{
    const auto &schema = data.schema();
    const auto &values = data.measure(measure);
    std::vector<StatBundle> out(store.num_rows());

    std::vector<std::pair<AttributeRef, ValueId>> preds;
    for (const auto &[attr, value] : filter) {
        auto ref = schema.locate(attr);
        auto code = data.dictionary(ref).find(value);
        if (!code) return out;
        preds.emplace_back(ref, *code);
    }
    std::vector<AttributeRef> leaf;
    for (const auto &b : store.blocks()) leaf.push_back({b.schema_index, b.num_levels - 1});

    std::vector<std::uint32_t> pos(leaf.size());
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        bool keep = true;
        for (const auto &[ref, code] : preds)
            if (data.code(r, ref) != code) {
                keep = false;
                break;
            }
        if (!keep) continue;
        for (std::size_t b = 0; b < leaf.size(); ++b) {
            auto p = store.level(store.blocks()[b].last_attribute()).position(data.code(r, leaf[b]));
            if (!p) {
                keep = false;
                break;
            }
            pos[b] = *p;
        }
        if (keep) out[store.row_index(pos)].add(values[r]);
    }
    return out;
}

const char *to_string(ModelTarget t)
{
    return t == ModelTarget::Count ? "COUNT" : "MEAN";
}

TrainingTarget make_target(const std::vector<StatBundle> &stats, ModelTarget target)
{
    TrainingTarget t;
    t.y.resize(stats.size());
    t.included.assign(stats.size(), 1);
    for (std::size_t r = 0; r < stats.size(); ++r) {
        if (target == ModelTarget::Count) {
            t.y[r] = stats[r].count;
        } else if (stats[r].empty()) {
            t.included[r] = 0;
        } else {
            t.y[r] = stats[r].mean;
        }
    }
    return t;
}

const char *to_string(FeatureKind k)
{
    switch (k) {
        case FeatureKind::Intercept: return "intercept";
        case FeatureKind::Default: return "default";
        case FeatureKind::Auxiliary: return "auxiliary";
        case FeatureKind::Custom: return "custom";
    }
    return "?";
}

std::map<std::string, double> FeatureMap::by_value(const FactorStore &store) const
{
    const auto &lv = store.level(store.attribute_index(attribute));
    std::map<std::string, double> out;
    for (std::uint32_t p = 0; p < lv.size(); ++p) out[lv.name(p)] = values.at(p);
    return out;
}

double median(std::vector<double> v)
{
    if (v.empty()) throw NoGroups("median of an empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lo + hi) / 2;
}

FeatureMap intercept_feature(const FactorStore &store)
{
    FeatureMap f;
    f.name = "intercept";
    f.attribute = store.attributes().at(0);
    f.kind = FeatureKind::Intercept;
    f.values.assign(store.level(0).size(), 1.0);
    return f;
}

namespace {

/// Included targets grouped by position of `attr`.
std::vector<std::vector<double>> targets_by_value(const FactorStore &store, std::size_t attr,
                                                  const TrainingTarget &target)
{
    if (target.y.size() != store.num_rows()) throw LengthMismatch("target length does not match the store");
    std::vector<std::vector<double>> out(store.level(attr).size());
    RowIterator it(store);
    RowDelta d;
    while (it.next(d)) {
        const auto r = it.row();
        if (!target.included.empty() && !target.included[r]) continue;
        out[it.current()[attr]].push_back(target.y[r]);
    }
    return out;
}

double included_median(const TrainingTarget &target)
{
    std::vector<double> all;
    for (std::size_t r = 0; r < target.y.size(); ++r)
        if (target.included.empty() || target.included[r]) all.push_back(target.y[r]);
    if (all.empty()) throw NoGroups("no training groups");
    return median(std::move(all));
}

void normalize(std::vector<double> &v)
{
    if (v.empty()) return;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    for (double &x : v) x = sd > 0 ? (x - mean) / sd : 0.0;
}

} // namespace

FeatureMap default_feature_map(const FactorStore &store, const std::string &attribute, const TrainingTarget &target,
                               bool impute)
{
    const std::size_t attr = store.attribute_index(attribute);
    auto groups = targets_by_value(store, attr, target);
    FeatureMap f;
    f.name = "default:" + attribute;
    f.attribute = attribute;
    f.kind = FeatureKind::Default;
    f.values.resize(groups.size());
    std::optional<double> fallback;
    for (std::size_t p = 0; p < groups.size(); ++p) {
        if (!groups[p].empty()) {
            f.values[p] = median(std::move(groups[p]));
            continue;
        }
        if (!impute)
            throw NoGroups("value '" + store.level(attr).name(static_cast<std::uint32_t>(p)) + "' of '" + attribute +
                           "' has no training groups");
        if (!fallback) fallback = included_median(target);
        f.values[p] = *fallback;
    }
    return f;
}

bool determines_rows(const FactorStore &store, const std::string &attribute, const TrainingTarget &target)
{
    const std::size_t attr = store.attribute_index(attribute);
    for (const auto &g : targets_by_value(store, attr, target))
        if (g.size() > 1) return false;
    return true;
}

void check_auxiliary(const AuxiliarySpec &spec, const DatasetSchema &schema)
{
    if (spec.join_attributes.empty()) throw SchemaError("auxiliary '" + spec.name + "' has no join attributes");
    std::optional<std::size_t> h;
    for (const auto &a : spec.join_attributes) {
        auto ref = schema.locate(a);
        if (h && *h != ref.hierarchy)
            throw SchemaError("auxiliary '" + spec.name + "' joins on attributes of several hierarchies");
        h = ref.hierarchy;
        spec.table.column(a);
    }
    const std::size_t mcol = spec.table.column(spec.measure);
    std::set<std::vector<std::string>> keys;
    for (std::size_t r = 0; r < spec.table.rows.size(); ++r) {
        const auto &row = spec.table.rows[r];
        if (!parse_number(row[mcol]))
            throw ParseError("auxiliary '" + spec.name + "' row " + std::to_string(r + 1) + ": measure is not numeric");
        std::vector<std::string> key;
        for (const auto &a : spec.join_attributes) key.push_back(row[spec.table.column(a)]);
        if (!keys.insert(key).second)
            throw SchemaError("auxiliary '" + spec.name + "': join attributes are not a key");
    }
}

std::optional<FeatureMap> auxiliary_feature_map(const AuxiliarySpec &spec, const FactorStore &store)
{
    std::vector<std::size_t> attrs;
    for (const auto &a : spec.join_attributes) {
        auto i = store.find_attribute(a);
        if (!i) return std::nullopt;
        attrs.push_back(*i);
    }
    const std::size_t deepest = *std::max_element(attrs.begin(), attrs.end());
    const std::size_t block = store.level(deepest).block;
    for (std::size_t a : attrs)
        if (store.level(a).block != block) return std::nullopt;

    const std::size_t mcol = spec.table.column(spec.measure);
    std::vector<std::size_t> kcols;
    for (const auto &a : spec.join_attributes) kcols.push_back(spec.table.column(a));
    std::map<std::vector<std::string>, double> lookup;
    std::vector<double> all;
    for (const auto &row : spec.table.rows) {
        auto v = parse_number(row[mcol]);
        if (!v) throw ParseError("auxiliary '" + spec.name + "': measure is not numeric");
        std::vector<std::string> key;
        for (std::size_t c : kcols) key.push_back(row[c]);
        lookup[key] = *v;
        all.push_back(*v);
    }
    const double fallback = all.empty() ? 0.0 : median(all);

    const auto &lv = store.level(deepest);
    FeatureMap f;
    f.name = "aux:" + spec.name;
    f.attribute = lv.attribute;
    f.kind = FeatureKind::Auxiliary;
    f.values.resize(lv.size());
    for (std::uint32_t p = 0; p < lv.size(); ++p) {
        // walk up to each join attribute
        std::vector<std::string> key(attrs.size());
        std::uint32_t cur = p;
        for (std::size_t a = deepest + 1; a-- > store.blocks()[block].first_attribute;) {
            for (std::size_t k = 0; k < attrs.size(); ++k)
                if (attrs[k] == a) key[k] = store.level(a).name(cur);
            if (a > store.blocks()[block].first_attribute) cur = store.level(a).parent[cur];
        }
        auto it = lookup.find(key);
        f.values[p] = it == lookup.end() ? fallback : it->second;
    }
    normalize(f.values);
    return f;
}

FeatureMap custom_feature(const FactorStore &store, const std::string &attribute, const std::string &name,
                          const CustomFn &fn, const TrainingTarget &target)
{
    auto stat = default_feature_map(store, attribute, target, true).by_value(store);
    const auto &lv = store.level(store.attribute_index(attribute));
    FeatureMap f;
    f.name = "custom:" + name + ":" + attribute;
    f.attribute = attribute;
    f.kind = FeatureKind::Custom;
    f.values.resize(lv.size());
    for (std::uint32_t p = 0; p < lv.size(); ++p) {
        const double v = fn(lv.name(p), stat);
        if (!std::isfinite(v))
            throw NonFinite("custom feature '" + name + "' is not finite for '" + lv.name(p) + "'");
        f.values[p] = v;
    }
    return f;
}

CustomFn builtin_custom(const std::string &name)
{
    if (name == "identity") {
        return [](const std::string &value, const std::map<std::string, double> &) {
            auto v = parse_number(value);
            return v ? *v : std::nan("");
        };
    }
    if (name.rfind("lag-", 0) == 0) {
        auto k = parse_number(name.substr(4));
        if (!k) throw SchemaError("bad lag '" + name + "'");
        const double lag = *k;
        return [lag](const std::string &value, const std::map<std::string, double> &stat) {
            auto v = parse_number(value);
            if (!v) return std::nan("");
            std::vector<double> all;
            for (const auto &[key, s] : stat) {
                auto kv = parse_number(key);
                if (kv && *kv == *v - lag) return s;
                all.push_back(s);
            }
            return median(all);
        };
    }
    throw SchemaError("unknown custom feature '" + name + "'");
}

std::vector<std::size_t> FeatureMatrixView::z_columns() const
{
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (z_mask[c]) out.push_back(c);
    return out;
}

std::uint64_t FeatureMatrixView::num_included() const
{
    if (included.empty()) return num_rows();
    return static_cast<std::uint64_t>(std::count(included.begin(), included.end(), std::uint8_t{1}));
}

std::optional<std::size_t> FeatureMatrixView::find_column(const std::string &name) const
{
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].name == name) return c;
    return std::nullopt;
}

FeatureMatrixView build_view(const FactorStore &store, std::vector<FeatureMap> columns, std::vector<double> y,
                             std::vector<std::uint8_t> included, std::vector<bool> z_mask)
{
    if (columns.empty()) throw ShapeMismatch("feature matrix has no columns");
    if (y.size() != store.num_rows())
        throw LengthMismatch("target has " + std::to_string(y.size()) + " rows, store has " +
                             std::to_string(store.num_rows()));
    if (!included.empty() && included.size() != y.size()) throw LengthMismatch("row mask length mismatch");
    if (z_mask.empty()) z_mask.assign(columns.size(), true);
    if (z_mask.size() != columns.size()) throw LengthMismatch("z mask length mismatch");

    std::vector<std::size_t> attr(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        attr[c] = store.attribute_index(columns[c].attribute);
        if (columns[c].values.size() != store.level(attr[c]).size())
            throw LengthMismatch("feature '" + columns[c].name + "' does not cover its attribute's domain");
    }
    std::vector<std::size_t> perm(columns.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return attr[a] < attr[b]; });

    FeatureMatrixView v;
    v.store = &store;
    for (std::size_t p : perm) {
        v.columns.push_back(std::move(columns[p]));
        v.column_attr.push_back(attr[p]);
        v.z_mask.push_back(z_mask[p]);
    }
    v.y = std::move(y);
    if (std::find(included.begin(), included.end(), std::uint8_t{0}) != included.end()) v.included = std::move(included);
    return v;
}

std::vector<bool> z_mask_excluding(const std::vector<FeatureMap> &columns, const std::set<std::string> &excluded)
{
    std::vector<bool> out;
    for (const auto &c : columns) out.push_back(!excluded.count(c.name));
    return out;
}

} // namespace drillex
