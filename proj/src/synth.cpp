#include "drillex/synth.hpp"

#include "drillex/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace drillex {

namespace {

std::vector<std::size_t> ranks(const std::vector<double> &v)
{
    std::vector<std::size_t> order(v.size()), r(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = i;
    return r;
}

std::string number(double x)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string group_name(std::size_t i)
{
    std::string s = std::to_string(i);
    return "g" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

struct Group
{
    std::vector<double> values;
};

void inject(Group &g, SynthError e, double shift)
{
    const std::size_t half = g.values.size() / 2;
    switch (e) {
        case SynthError::Missing: g.values.resize(g.values.size() - half); break;
        case SynthError::Dup:
            for (std::size_t i = 0; i < half; ++i) g.values.push_back(g.values[i]);
            break;
        case SynthError::Up:
            for (auto &v : g.values) v += shift;
            break;
        case SynthError::Down:
            for (auto &v : g.values) v -= shift;
            break;
    }
}

double stat_of(const std::vector<double> &v, ModelTarget t)
{
    if (t == ModelTarget::Count) return static_cast<double>(v.size());
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::size_t argmax(const std::vector<double> &v)
{
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

} // namespace

std::vector<std::string> synth_condition_names()
{
    return {"missing", "dup", "up", "down", "missing+down", "dup+up", "missing+dup", "down+up", "all"};
}

SynthCondition synth_condition(const std::string &name)
{
    using E = SynthError;
    SynthCondition c;
    c.name = name;
    if (name == "missing") c = {name, {E::Missing}, 1, {}, StatKind::Count, Direction::TooLow};
    else if (name == "dup") c = {name, {E::Dup}, 1, {}, StatKind::Count, Direction::TooHigh};
    else if (name == "up") c = {name, {E::Up}, 1, {}, StatKind::Mean, Direction::TooHigh};
    else if (name == "down") c = {name, {E::Down}, 1, {}, StatKind::Mean, Direction::TooLow};
    else if (name == "missing+down") c = {name, {E::Missing, E::Down}, 1, {}, StatKind::Sum, Direction::TooLow};
    else if (name == "dup+up") c = {name, {E::Dup, E::Up}, 1, {}, StatKind::Sum, Direction::TooHigh};
    // two true errors of the complained kind plus one decoy of the opposite kind
    else if (name == "missing+dup") c = {name, {E::Missing}, 2, {E::Dup}, StatKind::Count, Direction::TooLow};
    else if (name == "down+up") c = {name, {E::Down}, 2, {E::Up}, StatKind::Mean, Direction::TooLow};
    else if (name == "all") c = {name, {E::Missing, E::Down}, 2, {E::Dup, E::Up}, StatKind::Sum, Direction::TooLow};
    else throw InvalidComplaint("unknown synthetic condition '" + name + "'");
    return c;
}

double rank_correlation(const std::vector<double> &a, const std::vector<double> &b)
{
    if (a.size() != b.size()) throw LengthMismatch("rank correlation of vectors of different length");
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double m = (n - 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(ra[i]) - m, y = static_cast<double>(rb[i]) - m;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

std::vector<double> correlated_with(const std::vector<double> &x, std::vector<double> pool, double rho,
                                    std::mt19937_64 &rng)
{
    const std::size_t n = x.size();
    if (pool.size() != n) throw LengthMismatch("pool and target differ in length");
    if (!(rho >= -1 && rho <= 1)) throw NonFinite("correlation must lie in [-1, 1]");
    if (n < 3) return pool;

    // normal scores in two independent random orders
    std::normal_distribution<double> normal;
    std::vector<double> scores(n);
    for (auto &s : scores) s = normal(rng);
    std::sort(scores.begin(), scores.end());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 2);
    for (int c = 0; c < 2; ++c) {
        auto s = scores;
        std::shuffle(s.begin(), s.end(), rng);
        for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), c) = s[i];
    }
    Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    Eigen::Matrix2d e = cov.array() / (sd * sd.transpose()).array();

    Eigen::Matrix2d target_u;
    target_u << 1, rho, 0, std::sqrt(std::max(0.0, 1 - rho * rho));
    Eigen::Matrix2d e_u = Eigen::LLT<Eigen::Matrix2d>(e).matrixU();
    Eigen::MatrixXd t = m * e_u.inverse() * target_u;

    std::vector<double> t0(n), t1(n);
    for (std::size_t i = 0; i < n; ++i) {
        t0[i] = t(static_cast<Eigen::Index>(i), 0);
        t1[i] = t(static_cast<Eigen::Index>(i), 1);
    }
    const auto r0 = ranks(t0), r1 = ranks(t1), rx = ranks(x);
    std::vector<std::size_t> row_at_rank(n);
    for (std::size_t i = 0; i < n; ++i) row_at_rank[r0[i]] = i;
    std::sort(pool.begin(), pool.end());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = pool[r1[row_at_rank[rx[i]]]];
    return out;
}

SynthResult synth_harness(const SynthCondition &condition, const SynthConfig &config)
{
    const std::size_t ng = config.groups;
    if (ng < condition.true_groups + (condition.decoy.empty() ? 0 : 1) + 2)
        throw NoGroups("too few synthetic groups for the condition");

    DatasetSchema schema;
    schema.hierarchies = {{"G", {"g"}}};
    schema.measures = {"m"};
    const ViewSpec root = ViewSpec::root(schema, "m");
    const Complaint complaint{{}, condition.stat, condition.direction};

    std::vector<std::string> names(ng);
    for (std::size_t i = 0; i < ng; ++i) names[i] = group_name(i);

    std::size_t hits_ours = 0, hits_sens = 0, hits_support = 0, hits_outlier = 0;
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
        std::mt19937_64 rng(config.seed * 1000003u + trial);
        std::normal_distribution<double> rows_dist(config.row_mean, config.row_sd);
        std::normal_distribution<double> value_dist(config.value_mean, config.value_sd);
        std::normal_distribution<double> normal;

        std::vector<Group> groups(ng);
        for (auto &g : groups) {
            const auto n = static_cast<std::size_t>(std::max(2.0, std::round(rows_dist(rng))));
            g.values.resize(n);
            for (auto &v : g.values) v = value_dist(rng);
        }

        // auxiliary tables correlated with the clean statistics
        ExplainConfig cfg;
        cfg.train = config.train;
        for (ModelTarget mt : models_for(condition.stat)) {
            std::vector<double> clean(ng), pool(ng);
            for (std::size_t i = 0; i < ng; ++i) clean[i] = stat_of(groups[i].values, mt);
            for (auto &p : pool) p = normal(rng);
            const auto aux = correlated_with(clean, pool, config.rho, rng);
            const std::string name = mt == ModelTarget::Count ? "aux_count" : "aux_mean";
            Table t;
            t.header = {"g", name};
            for (std::size_t i = 0; i < ng; ++i) t.rows.push_back({names[i], number(aux[i])});
            cfg.auxiliary.push_back({name, std::move(t), {"g"}, name});
        }

        std::vector<std::size_t> perm(ng);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::set<std::string> truth;
        for (std::size_t k = 0; k < condition.true_groups; ++k) {
            for (SynthError e : condition.errors) inject(groups[perm[k]], e, config.shift);
            truth.insert(names[perm[k]]);
        }
        if (!condition.decoy.empty())
            for (SynthError e : condition.decoy) inject(groups[perm[condition.true_groups]], e, config.shift);

        Table facts;
        facts.header = {"g", "m"};
        for (std::size_t i = 0; i < ng; ++i)
            for (double v : groups[i].values) facts.rows.push_back({names[i], number(v)});
        const Dataset data = Dataset::from_table(facts, schema);

        const auto ev = evaluate_hierarchy(data, root, complaint, "G", cfg);
        hits_ours += truth.count(ev.candidates.front().group.at("g"));

        // sensitivity: delete the group
        {
            std::vector<StatBundle> deleted(ev.groups.size());
            const auto c = rank_candidates("G", ev.keys, ev.groups, deleted, complaint);
            hits_sens += truth.count(c.front().group.at("g"));
        }
        // support: largest group
        {
            std::vector<double> counts;
            for (const auto &g : ev.groups) counts.push_back(g.count);
            hits_support += truth.count(ev.keys[argmax(counts)].at("g"));
        }
        // outlier: largest deviation between the statistic and its prediction
        {
            std::vector<double> dev;
            for (std::size_t i = 0; i < ev.groups.size(); ++i) {
                const auto a = stat_value(ev.groups[i], condition.stat);
                const auto b = stat_value(ev.repairs[i], condition.stat);
                dev.push_back(a && b ? std::abs(*a - *b) : 0.0);
            }
            hits_outlier += truth.count(ev.keys[argmax(dev)].at("g"));
        }
    }

    SynthResult out;
    out.condition = condition.name;
    out.rho = config.rho;
    out.trials = config.trials;
    const double n = static_cast<double>(std::max<std::size_t>(1, config.trials));
    out.accuracy = {{"ours", hits_ours / n},
                    {"sensitivity", hits_sens / n},
                    {"support", hits_support / n},
                    {"outlier", hits_outlier / n}};
    return out;
}

} // namespace drillex
