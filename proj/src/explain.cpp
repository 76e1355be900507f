#include "drillex/explain.hpp"

#include "drillex/errors.hpp"
#include "drillex/factorizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace drillex {

const char *to_string(Direction d)
{
    switch (d) {
        case Direction::TooHigh: return "too_high";
        case Direction::TooLow: return "too_low";
        case Direction::Target: return "target";
    }
    return "?";
}

Direction direction_from_string(const std::string &s)
{
    if (s == "too_high" || s == "high") return Direction::TooHigh;
    if (s == "too_low" || s == "low") return Direction::TooLow;
    if (s == "target") return Direction::Target;
    throw InvalidComplaint("unknown direction '" + s + "'");
}

std::optional<double> stat_value(const StatBundle &b, StatKind stat)
{
    switch (stat) {
        case StatKind::Count: return b.count;
        case StatKind::Sum: return b.sum();
        case StatKind::Mean: return b.mean_value();
        case StatKind::Std: return b.std();
    }
    return std::nullopt;
}

double complaint_score(double value, const Complaint &c)
{
    switch (c.direction) {
        case Direction::Target: return std::abs(value - c.target);
        case Direction::TooHigh: return value;
        case Direction::TooLow: return -value;
    }
    return value;
}

double propagate_repair(const std::vector<StatBundle> &groups, std::size_t index, const StatBundle &repaired,
                        StatKind stat)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (stat == StatKind::Std) {
        auto g = groups;
        g.at(index) = repaired;
        double total = 0;
        for (const auto &b : g) total += b.count;
        if (total <= 0) return nan;
        return combine(g).std().value_or(nan);
    }
    double count = 0, sum = 0;
    for (const auto &b : groups) {
        count += b.count;
        sum += b.sum();
    }
    const auto &old = groups.at(index);
    count += repaired.count - old.count;
    sum += repaired.sum() - old.sum();
    switch (stat) {
        case StatKind::Count: return count;
        case StatKind::Sum: return sum;
        default: return count > 0 ? sum / count : nan;
    }
}

std::vector<RepairCandidate> rank_candidates(const std::string &hierarchy, const std::vector<GroupKey> &keys,
                                             const std::vector<StatBundle> &groups,
                                             const std::vector<StatBundle> &repairs, const Complaint &complaint)
{
    if (keys.size() != groups.size() || repairs.size() != groups.size())
        throw LengthMismatch("candidate keys, groups and repairs differ in length");
    std::vector<RepairCandidate> out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        RepairCandidate c;
        c.hierarchy = hierarchy;
        c.group = keys[i];
        c.original = groups[i];
        c.repaired = repairs[i];
        c.repaired_value = propagate_repair(groups, i, repairs[i], complaint.stat);
        c.score = std::isfinite(c.repaired_value) ? complaint_score(c.repaired_value, complaint)
                                                  : std::numeric_limits<double>::infinity();
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const RepairCandidate &a, const RepairCandidate &b) {
        if (a.score != b.score) return a.score < b.score;
        return a.group < b.group;
    });
    return out;
}

void sort_candidates(std::vector<RepairCandidate> &c, const DatasetSchema &schema)
{
    std::stable_sort(c.begin(), c.end(), [&](const RepairCandidate &a, const RepairCandidate &b) {
        if (a.score != b.score) return a.score < b.score;
        const auto ha = schema.hierarchy_index(a.hierarchy), hb = schema.hierarchy_index(b.hierarchy);
        if (ha != hb) return ha < hb;
        return a.group < b.group;
    });
}

std::vector<ModelTarget> models_for(StatKind stat)
{
    switch (stat) {
        case StatKind::Count: return {ModelTarget::Count};
        case StatKind::Mean: return {ModelTarget::Mean};
        default: return {ModelTarget::Count, ModelTarget::Mean};
    }
}

std::vector<std::pair<GroupKey, StatBundle>> view_groups(const Dataset &data, const ViewSpec &view)
{
    const auto &schema = data.schema();
    view.check(schema);
    const auto &values = data.measure(view.measure);
    std::vector<std::pair<AttributeRef, std::string>> preds;
    for (const auto &[a, v] : view.filter) preds.emplace_back(schema.locate(a), v);
    std::vector<std::pair<std::string, AttributeRef>> by;
    for (const auto &a : view.groupby(schema)) by.emplace_back(a, schema.locate(a));

    std::map<GroupKey, StatBundle> groups;
    for (std::size_t r = 0; r < data.num_rows(); ++r) {
        bool keep = true;
        for (const auto &[ref, v] : preds)
            if (data.dictionary(ref).value(data.code(r, ref)) != v) {
                keep = false;
                break;
            }
        if (!keep) continue;
        GroupKey k;
        for (const auto &[a, ref] : by) k[a] = data.dictionary(ref).value(data.code(r, ref));
        groups[k].add(values[r]);
    }
    return {groups.begin(), groups.end()};
}

std::vector<FeatureMap> model_features(const FactorStore &store, const TrainingTarget &target,
                                       const ExplainConfig &config)
{
    std::vector<FeatureMap> cols{intercept_feature(store)};
    for (std::size_t a = 0; a < store.num_attributes(); ++a) {
        const auto &name = store.attributes()[a];
        if (store.level(a).size() < 2 || determines_rows(store, name, target)) continue;
        cols.push_back(default_feature_map(store, name, target, true));
    }
    for (const auto &aux : config.auxiliary)
        if (auto f = auxiliary_feature_map(aux, store)) cols.push_back(std::move(*f));
    for (const auto &c : config.custom)
        if (store.find_attribute(c.attribute))
            cols.push_back(custom_feature(store, c.attribute, c.function, builtin_custom(c.function), target));
    return cols;
}

HierarchyEvaluation evaluate_hierarchy(const Dataset &data, const ViewSpec &view, const Complaint &complaint,
                                       const std::string &hierarchy, const ExplainConfig &config, AggCache *cache)
{
    const auto &schema = data.schema();
    view.check(schema);
    const std::size_t h = schema.hierarchy_index(hierarchy);
    if (!view.has_remaining_depth(schema, h))
        throw AtLeafLevel("hierarchy '" + hierarchy + "' has no level left to drill into");
    {
        auto by = view.groupby(schema);
        std::set<std::string> want(by.begin(), by.end()), got;
        for (const auto &[a, v] : complaint.tuple) got.insert(a);
        if (want != got) throw InvalidComplaint("complaint tuple does not match the view's group-by");
    }

    auto depth = view.depth;
    depth[h] += 1;
    const auto order = attribute_order(schema, hierarchy, &depth);
    const auto store = FactorStore::build(data, order, view.filter);
    const auto stats = group_stats(data, store, view.filter, view.measure);
    const auto layout = cluster_layout(store);
    const std::string &drilled = store.attributes().back();

    std::optional<std::size_t> cluster;
    for (std::size_t i = 0; i < layout.size() && !cluster; ++i) {
        auto key = store.group_key(layout.begin[i]);
        key.erase(drilled);
        if (key == complaint.tuple) cluster = i;
    }
    if (!cluster) throw InvalidComplaint("complaint tuple is not a group of the view");

    HierarchyEvaluation ev;
    ev.hierarchy = hierarchy;
    ev.training_rows = store.num_rows();
    const std::uint64_t begin = layout.begin[*cluster], end = layout.begin[*cluster + 1];
    for (std::uint64_t r = begin; r < end; ++r) {
        ev.keys.push_back(store.group_key(r));
        ev.groups.push_back(stats[r]);
    }
    {
        double total = 0;
        for (const auto &g : ev.groups) total += g.count;
        if (total <= 0 || !stat_value(combine(ev.groups), complaint.stat))
            throw InvalidComplaint(std::string(to_string(complaint.stat)) + " of the complaint tuple is undefined");
    }

    const auto aggs = compute_all(store, cache);
    for (ModelTarget mt : models_for(complaint.stat)) {
        const auto target = make_target(stats, mt);
        auto cols = model_features(store, target, config);
        auto mask = z_mask_excluding(cols, config.z_exclude);
        const auto fv = build_view(store, std::move(cols), target.y, target.included, std::move(mask));
        const auto model = fit(fv, aggs, config.train);
        auto pred = predict_cluster(model, fv, *cluster);
        (mt == ModelTarget::Count ? ev.count_prediction : ev.mean_prediction) = std::move(pred);
    }

    for (std::size_t k = 0; k < ev.groups.size(); ++k) {
        const StatBundle &orig = ev.groups[k];
        StatBundle rep = orig;
        double count = orig.count, mean = orig.mean;
        if (ev.count_prediction) count = std::max(0.0, std::round((*ev.count_prediction)[k]));
        if (ev.mean_prediction && count > 0) mean = (*ev.mean_prediction)[k];
        rep.reset(count, mean);
        if (complaint.stat == StatKind::Std) {
            const double sd = orig.std().value_or(0.0);
            rep.m2 = count > 1 ? (count - 1) * sd * sd : 0.0;
        }
        if (count <= 0) rep = StatBundle{};
        ev.repairs.push_back(rep);
    }
    ev.candidates = rank_candidates(hierarchy, ev.keys, ev.groups, ev.repairs, complaint);
    return ev;
}

Recommendation rank(const Dataset &data, const ViewSpec &view, const Complaint &complaint,
                    const ExplainConfig &config, AggCache *cache)
{
    const auto &schema = data.schema();
    view.check(schema);
    std::vector<std::string> names;
    for (std::size_t h = 0; h < schema.hierarchies.size(); ++h)
        if (view.has_remaining_depth(schema, h)) names.push_back(schema.hierarchies[h].name);
    if (names.empty()) throw NoCandidates("every hierarchy is at its leaf level");

    std::vector<HierarchyEvaluation> evals;
    if (config.parallel && names.size() > 1) {
        std::vector<std::future<HierarchyEvaluation>> jobs;
        for (const auto &n : names)
            jobs.push_back(std::async(std::launch::async, [&, n] {
                return evaluate_hierarchy(data, view, complaint, n, config, cache);
            }));
        for (auto &j : jobs) evals.push_back(j.get());
    } else {
        for (const auto &n : names) evals.push_back(evaluate_hierarchy(data, view, complaint, n, config, cache));
    }

    Recommendation rec;
    rec.current_value = *stat_value(combine(evals.front().groups), complaint.stat);
    rec.current_score = complaint_score(rec.current_value, complaint);
    std::vector<RepairCandidate> all;
    for (auto &ev : evals) {
        HierarchyRanking hr;
        hr.hierarchy = ev.hierarchy;
        const std::size_t k = std::min(config.k, ev.candidates.size());
        hr.top.assign(ev.candidates.begin(), ev.candidates.begin() + static_cast<std::ptrdiff_t>(k));
        if (!ev.candidates.empty()) all.push_back(ev.candidates.front());
        rec.hierarchies.push_back(std::move(hr));
    }
    sort_candidates(all, schema);
    rec.best = all.front();
    return rec;
}

} // namespace drillex
