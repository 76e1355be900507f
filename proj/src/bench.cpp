#include "drillex/bench.hpp"

#include "drillex/aggregates.hpp"
#include "drillex/factorizer.hpp"
#include "drillex/fmatrix.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <random>

namespace drillex {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Per-call time; fast operations are looped until a batch takes at least a millisecond.
template <class F> double best_of(int repeats, F &&fn)
{
    std::size_t inner = 1;
    for (;;) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < inner; ++i) fn();
        if (seconds_since(t0) >= 1e-3 || inner >= (1u << 20)) break;
        inner *= 2;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < inner; ++i) fn();
        best = std::min(best, seconds_since(t0) / static_cast<double>(inner));
    }
    return best;
}

} // namespace

BenchRow bench_point(std::size_t hierarchies, std::size_t width, int repeats, std::uint64_t seed)
{
    DatasetSchema schema;
    Table facts;
    for (std::size_t h = 0; h < hierarchies; ++h) {
        const std::string a = "a" + std::to_string(h);
        schema.hierarchies.push_back({"H" + std::to_string(h), {a}});
        facts.header.push_back(a);
    }
    schema.measures = {"m"};
    facts.header.push_back("m");
    // each value once: the store's parallel groups are the full cross product anyway
    for (std::size_t v = 0; v < width; ++v) {
        std::vector<std::string> row(hierarchies, "v" + std::to_string(v));
        row.push_back("0");
        facts.rows.push_back(std::move(row));
    }
    const Dataset data = Dataset::from_table(facts, schema);
    const auto store = FactorStore::build(data, attribute_order(schema, schema.hierarchies.back().name), {});

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<FeatureMap> cols{intercept_feature(store)};
    for (std::size_t a = 0; a < store.num_attributes(); ++a) {
        FeatureMap f;
        f.name = "f_" + store.attributes()[a];
        f.attribute = store.attributes()[a];
        f.values.resize(store.level(a).size());
        for (auto &x : f.values) x = normal(rng);
        cols.push_back(std::move(f));
    }
    const auto n = store.num_rows();
    const auto view = build_view(store, std::move(cols), std::vector<double>(n, 0.0));

    BenchRow row;
    row.hierarchies = hierarchies;
    row.width = width;
    row.rows = n;
    row.columns = view.num_columns();

    DecompAggs aggs = compute_all(store);
    row.aggregates = best_of(repeats, [&] { aggs = compute_all(store); });
    DenseMatrix g;
    row.gram = best_of(repeats, [&] { g = gram(view, aggs); });
    DenseMatrix y = DenseMatrix::Ones(1, static_cast<Eigen::Index>(n));
    row.left_mul = best_of(repeats, [&] { (void)left_mul(y, view, aggs); });
    DenseMatrix b = DenseMatrix::Ones(static_cast<Eigen::Index>(view.num_columns()), 1);
    row.right_mul = best_of(repeats, [&] { (void)right_mul(view, b); });
    DenseMatrix x;
    row.materialize = best_of(repeats, [&] { x = materialize(view); });
    DenseMatrix dg;
    row.dense_gram = best_of(repeats, [&] { dg = x.transpose() * x; });
    row.max_abs_diff = (g - dg).cwiseAbs().maxCoeff();
    return row;
}

std::vector<BenchRow> bench_range(std::size_t max_hierarchies, std::size_t width, int repeats, std::uint64_t seed)
{
    std::vector<BenchRow> out;
    for (std::size_t d = 1; d <= max_hierarchies; ++d) out.push_back(bench_point(d, width, repeats, seed));
    return out;
}

} // namespace drillex
