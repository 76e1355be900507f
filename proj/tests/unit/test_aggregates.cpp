#include "drillex/aggregates.hpp"
#include "drillex/errors.hpp"
#include "support/instances.hpp"

#include <doctest.h>

#include <random>

using namespace drillex;
using namespace drillex::testing;

namespace {

std::map<std::string, std::uint64_t> named_cnt(const DecompAggs &a, const FactorStore &s, const std::string &attr)
{
    const std::size_t i = s.attribute_index(attr);
    std::map<std::string, std::uint64_t> out;
    for (auto [v, c] : a.cnt(i)) out[s.level(i).dictionary->value(v)] = c;
    return out;
}

/// Counts from the brute-force expansion: distinct suffix rows starting at the shallower attribute.
void check_against_oracle(const DecompAggs &aggs, const Expanded &e)
{
    const std::size_t m = e.attributes.size();
    CHECK(aggs.rows() == e.rows.size());
    for (std::size_t a = 0; a < m; ++a) {
        auto suffix = suffix_projection(e, a);
        std::map<ValueId, std::uint64_t> cnt;
        for (const auto &r : suffix) cnt[r[0]] += 1;
        CHECK(aggs.cnt(a) == cnt);
        CHECK(aggs.total(a) == suffix.size());
        CHECK(aggs.replication(a) * aggs.total(a) == aggs.rows());
        for (std::size_t d = a + 1; d < m; ++d) {
            std::map<std::pair<ValueId, ValueId>, std::uint64_t> cof;
            for (const auto &r : suffix) cof[{r[d - a], r[0]}] += 1;
            auto got = aggs.cof_map(d, a);
            std::erase_if(got, [](const auto &kv) { return kv.second == 0; });
            CHECK(got == cof);
            std::uint64_t sum = 0;
            for (const auto &[k, c] : cof) {
                CHECK(aggs.cof(d, k.first, a, k.second) == c);
                sum += c;
            }
            CHECK(sum == aggs.total(a));
        }
    }
}

} // namespace

TEST_CASE("join and marginalize kernel")
{
    CountRelation r{{"A", "B"}, {{{1, 10}, 1}, {{2, 10}, 2}}};
    CountRelation t{{"B", "C"}, {{{10, 100}, 3}, {{10, 101}, 4}}};
    std::uint64_t work = 0;
    auto j = join(r, t, &work);
    CHECK(work == 4);
    auto m = marginalize(j, "C");
    CHECK(m.schema == std::vector<std::string>{"A", "B"});
    CHECK(m.tuples == std::map<std::vector<ValueId>, std::uint64_t>{{{1, 10}, 7}, {{2, 10}, 14}});
    CHECK_THROWS_AS(marginalize(m, "Z"), UnknownAttribute);
}

TEST_CASE("village example counts")
{
    auto d = village_dataset();
    auto s = FactorStore::build(d, attribute_order(d.schema(), "Geo"), {});
    auto a = compute_all(s);
    CHECK(named_cnt(a, s, "V") == std::map<std::string, std::uint64_t>{{"v1", 1}, {"v2", 1}, {"v3", 1}});
    CHECK(named_cnt(a, s, "D") == std::map<std::string, std::uint64_t>{{"d1", 2}, {"d2", 1}});
    CHECK(named_cnt(a, s, "T") == std::map<std::string, std::uint64_t>{{"t1", 3}, {"t2", 3}});
    CHECK(a.total(0) == 6);
    CHECK(a.total(1) == 3);

    const auto &dd = d.dictionary("D");
    const auto &vd = d.dictionary("V");
    auto cof = a.cof_map(2, 1);
    CHECK(cof == std::map<std::pair<ValueId, ValueId>, std::uint64_t>{
                     {{vd.at("v1"), dd.at("d1")}, 1}, {{vd.at("v2"), dd.at("d1")}, 1}, {{vd.at("v3"), dd.at("d2")}, 1}});
    CHECK_FALSE(a.cof_is_factored(2, 1));
    CHECK(a.cof_is_factored(2, 0));
    CHECK(a.cof(2, vd.at("v3"), 0, d.dictionary("T").at("t1")) == 1);
}

TEST_CASE("aggregates match the join-then-group-by oracle on random stores")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 250; ++trial) {
        auto data = random_dataset(rng);
        auto v = random_view(data, rng);
        auto order = attribute_order(data.schema(), v.drilled, &v.depth);
        auto store = FactorStore::build(data, order, v.filter);
        check_against_oracle(compute_all(store), brute_expand(data, order, v.filter));
    }
}

TEST_CASE("road drill-down: CNT_T[t1] goes from 3 to 4")
{
    auto d = road_dataset();
    const auto &sc = d.schema();
    std::vector<std::size_t> before{1, 2}, after{1, 3};
    auto s0 = FactorStore::build(d, attribute_order(sc, "Geo", &before), {});
    auto s1 = FactorStore::build(d, attribute_order(sc, "Geo", &after), {});
    AggCache cache;
    auto a0 = compute_all(s0, &cache);
    CHECK(named_cnt(a0, s0, "T").at("t1") == 3);
    auto a1 = drilldown_update(a0, s1, "Geo", "R", &cache);
    CHECK(named_cnt(a1, s1, "T").at("t1") == 4);
    CHECK(a1.join_work("Time") == 0);
    check_against_oracle(a1, brute_expand(d, attribute_order(sc, "Geo", &after), {}));
}

TEST_CASE("drill-down with one child per leaf leaves other aggregates unchanged")
{
    DatasetSchema sc;
    sc.hierarchies = {{"A", {"a"}}, {"B", {"b1", "b2"}}};
    sc.measures = {"m"};
    auto d = Dataset::from_table(
        make_table({"a", "b1", "b2", "m"}, {{"x", "p", "p1", "1"}, {"y", "q", "q1", "2"}, {"x", "r", "r1", "3"}}), sc);
    std::vector<std::size_t> before{1, 1}, after{1, 2};
    auto s0 = FactorStore::build(d, attribute_order(sc, "B", &before), {});
    auto s1 = FactorStore::build(d, attribute_order(sc, "B", &after), {});
    auto a0 = compute_all(s0);
    auto a1 = drilldown_update(a0, s1, "B", "b2");
    CHECK(a0.cnt(0) == a1.cnt(0));
    CHECK(a0.total(0) == a1.total(0));
}

TEST_CASE("drilldown_update equals recomputation on random stores")
{
    std::mt19937_64 rng(17);
    int done = 0;
    for (int trial = 0; trial < 400 && done < 200; ++trial) {
        auto data = random_dataset(rng);
        auto v = random_view(data, rng);
        const auto &sc = data.schema();
        const std::size_t h = sc.hierarchy_index(v.drilled);
        if (!ViewSpec{v.depth, {}, "m"}.has_remaining_depth(sc, h)) continue;
        auto deeper = v.depth;
        deeper[h] += 1;
        auto s0 = FactorStore::build(data, attribute_order(sc, v.drilled, &v.depth), v.filter);
        auto o1 = attribute_order(sc, v.drilled, &deeper);
        auto s1 = FactorStore::build(data, o1, v.filter);
        AggCache cache;
        auto a0 = compute_all(s0, &cache);
        auto a1 = drilldown_update(a0, s1, v.drilled, sc.hierarchies[h].attributes[deeper[h] - 1], &cache);
        auto fresh = compute_all(s1);
        for (std::size_t a = 0; a < s1.num_attributes(); ++a) {
            CHECK(a1.cnt(a) == fresh.cnt(a));
            CHECK(a1.total(a) == fresh.total(a));
            for (std::size_t b = 0; b < a; ++b) CHECK(a1.cof_map(a, b) == fresh.cof_map(a, b));
        }
        for (const auto &other : sc.hierarchies)
            if (other.name != v.drilled) CHECK(a1.join_work(other.name) == 0);
        check_against_oracle(a1, brute_expand(data, o1, v.filter));
        ++done;
    }
    CHECK(done >= 100);
}

TEST_CASE("stale aggregates are rejected")
{
    auto d = road_dataset();
    const auto &sc = d.schema();
    std::vector<std::size_t> one{1, 1}, three{1, 3};
    auto s0 = FactorStore::build(d, attribute_order(sc, "Geo", &one), {});
    auto s2 = FactorStore::build(d, attribute_order(sc, "Geo", &three), {});
    auto a0 = compute_all(s0);
    CHECK_THROWS_AS(drilldown_update(a0, s2, "Geo", "R"), StaleAggs);
    std::vector<std::size_t> two{1, 2};
    auto filtered = FactorStore::build(d, attribute_order(sc, "Geo", &two), {{"T", "t1"}});
    auto s3 = FactorStore::build(d, attribute_order(sc, "Geo", &three), {});
    CHECK_THROWS_AS(drilldown_update(compute_all(filtered), s3, "Geo", "R"), StaleAggs);
    CHECK_THROWS_AS(drilldown_update(a0, s2, "Geo", "V"), StaleAggs);
}

TEST_CASE("cache hits skip join work and differing depth misses")
{
    auto d = road_dataset();
    const auto &sc = d.schema();
    std::vector<std::size_t> two{1, 2}, three{1, 3};
    AggCache cache;
    auto s2 = FactorStore::build(d, attribute_order(sc, "Geo", &two), {});
    auto first = compute_all(s2, &cache);
    CHECK(first.join_work("Geo") > 0);
    auto second = compute_all(s2, &cache);
    CHECK(second.join_work("Geo") == 0);
    CHECK(second.join_work("Time") == 0);
    CHECK(second.cnt(1) == first.cnt(1));

    auto s3 = FactorStore::build(d, attribute_order(sc, "Geo", &three), {});
    CHECK(compute_all(s3, &cache).join_work("Geo") > 0);
    cache.clear();
    CHECK(compute_all(s2, &cache).join_work("Geo") > 0);
}
