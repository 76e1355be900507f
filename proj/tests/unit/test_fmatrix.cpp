#include "drillex/errors.hpp"
#include "drillex/fmatrix.hpp"
#include "support/dense.hpp"

#include <doctest.h>

using namespace drillex;
using namespace drillex::testing;

namespace {

double max_abs(const DenseMatrix &a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double rel_gap(const DenseMatrix &got, const DenseMatrix &want)
{
    return max_abs(got - want) / std::max(1.0, max_abs(want));
}

DenseMatrix masked(const Instance &inst)
{
    DenseMatrix x = inst.x;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!inst.view.is_included(static_cast<std::uint64_t>(r))) x.row(r).setZero();
    return x;
}

FeatureMatrixView village_view(const FactorStore &s)
{
    std::vector<FeatureMap> cols{intercept_feature(s)};
    FeatureMap v{"fv", "V", FeatureKind::Custom, {1, 2, 3}};
    FeatureMap d{"fd", "D", FeatureKind::Custom, {10, 20}};
    cols.push_back(v);
    cols.push_back(d);
    return build_view(s, cols, std::vector<double>(s.num_rows(), 0.0));
}

} // namespace

TEST_CASE("village gram and products")
{
    auto data = village_dataset();
    auto s = FactorStore::build(data, attribute_order(data.schema(), "Geo"), {});
    auto view = village_view(s);
    auto aggs = compute_all(s);
    // columns: intercept (T), fd (D), fv (V); 6 rows = 2 times x {(d1,v1),(d1,v2),(d2,v3)}
    DenseMatrix x(6, 3);
    x << 1, 10, 1, 1, 10, 2, 1, 20, 3, 1, 10, 1, 1, 10, 2, 1, 20, 3;
    CHECK(max_abs(materialize(view) - x) == 0);
    DenseMatrix g = gram(view, aggs);
    CHECK(g(0, 0) == 6);
    CHECK(g(0, 1) == 80);
    CHECK(g(1, 2) == 2 * (10 + 20 + 60));
    CHECK(g(2, 2) == 2 * (1 + 4 + 9));
    CHECK(max_abs(g - x.transpose() * x) == 0);
    CHECK_THROWS_AS(materialize(view, 17), BudgetExceeded);
    CHECK_NOTHROW(materialize(view, 18));
}

TEST_CASE("gram, left and right products match the dense expansion")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0, 1);
    for (int trial = 0; trial < 250; ++trial) {
        auto inst = random_instance(rng);
        const auto &view = inst.view;
        auto aggs = compute_all(*inst.store);
        const auto n = static_cast<Eigen::Index>(view.num_rows());
        const auto m = static_cast<Eigen::Index>(view.num_columns());
        REQUIRE(inst.x.rows() == n);
        CHECK(max_abs(materialize(view) - inst.x) == 0);

        DenseMatrix g = gram(view, aggs);
        CHECK(rel_gap(g, inst.x.transpose() * inst.x) < 1e-9);
        CHECK(max_abs(g - g.transpose()) == 0);
        DenseMatrix xm = masked(inst);
        CHECK(rel_gap(gram_included(view, aggs), xm.transpose() * xm) < 1e-9);

        DenseMatrix a = DenseMatrix::NullaryExpr(3, n, [&] { return gauss(rng); });
        CHECK(rel_gap(left_mul(a, view, aggs), a * inst.x) < 1e-9);
        DenseMatrix b = DenseMatrix::NullaryExpr(m, 2, [&] { return gauss(rng); });
        RightMulStats st;
        CHECK(rel_gap(right_mul(view, b, &st, 7), inst.x * b) < 1e-9);
        CHECK(st.refreshes == static_cast<std::uint64_t>(std::max<Eigen::Index>(0, (n - 1) / 7)));
        CHECK(st.max_drift < 1e-12);

        CHECK(rel_gap(feature_row(view, static_cast<std::uint64_t>(n - 1)).transpose(), inst.x.row(n - 1)) == 0);
    }
}

TEST_CASE("gram is positive semidefinite")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = random_instance(rng);
        auto g = gram(inst.view, compute_all(*inst.store));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        CHECK(es.eigenvalues().minCoeff() > -1e-9 * std::max(1.0, max_abs(g)));
    }
}

TEST_CASE("product shape errors")
{
    std::mt19937_64 rng(8);
    auto inst = random_instance(rng);
    auto aggs = compute_all(*inst.store);
    const auto n = static_cast<Eigen::Index>(inst.view.num_rows());
    CHECK_THROWS_AS(left_mul(DenseMatrix::Zero(1, n + 1), inst.view, aggs), ShapeMismatch);
    CHECK_THROWS_AS(right_mul(inst.view, DenseMatrix::Zero(static_cast<Eigen::Index>(inst.view.num_columns()) + 1, 1)),
                    ShapeMismatch);
    auto other = village_dataset();
    auto s = FactorStore::build(other, attribute_order(other.schema(), "Geo"), {});
    CHECK_THROWS_AS(gram(inst.view, compute_all(s)), StaleAggs);
}

TEST_CASE("cluster iterators match the dense per-cluster blocks")
{
    std::mt19937_64 rng(33);
    std::normal_distribution<double> gauss(0, 1);
    for (int trial = 0; trial < 250; ++trial) {
        auto inst = random_instance(rng);
        const auto &view = inst.view;
        auto begins = dense_cluster_begins(inst.expanded);
        auto layout = cluster_layout(*inst.store);
        REQUIRE(layout.begin == begins);
        for (std::size_t i = 0; i < layout.size(); ++i) CHECK(layout.cluster_of(layout.begin[i]) == i);

        ClusterGramIter gi(view);
        ClusterLeftIter li(view);
        ClusterRightIter ri(view);
        const auto mz = static_cast<Eigen::Index>(gi.num_z());
        DenseMatrix out;
        std::size_t ci = 0, count = 0;
        while (gi.next(ci, out)) {
            CHECK(ci == count);
            auto zi = dense_cluster_z(inst, begins[ci], begins[ci + 1]);
            CHECK(rel_gap(out, zi.transpose() * zi) < 1e-9);

            Vector d = Vector::NullaryExpr(zi.rows(), [&] { return gauss(rng); });
            Vector lo(mz);
            std::size_t cl = 0;
            REQUIRE(li.next(d, cl, lo));
            CHECK(cl == ci);
            CHECK(rel_gap(lo.transpose(), (d.transpose() * zi)) < 1e-9);

            Vector c = Vector::NullaryExpr(mz, [&] { return gauss(rng); });
            Vector ro(zi.rows());
            REQUIRE(ri.next(c, cl, ro));
            CHECK(rel_gap(ro, zi * c) < 1e-9);
            ++count;
        }
        CHECK(count == layout.size());
        CHECK(li.done());
        CHECK(ri.done());
    }
}

TEST_CASE("cluster iterator shape errors")
{
    auto data = village_dataset();
    auto s = FactorStore::build(data, attribute_order(data.schema(), "Geo"), {});
    auto view = village_view(s);
    ClusterLeftIter li(view);
    Vector d(5), out(3);
    std::size_t c = 0;
    CHECK_THROWS_AS(li.next(d, c, out), ShapeMismatch);
    CHECK(li.layout().size() == 4); // (t, d) pairs: t1d1, t1d2, t2d1, t2d2
}

TEST_CASE("right_mul drift stays small over long runs")
{
    RandomShape big{3, 3, 9};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        InstanceOptions opt;
        opt.shape = big;
        auto inst = random_instance(rng, opt);
        DenseMatrix b = DenseMatrix::NullaryExpr(static_cast<Eigen::Index>(inst.view.num_columns()), 1,
                                                 [&] { return 1e3 * gauss(rng); });
        RightMulStats st;
        auto got = right_mul(inst.view, b, &st, 16);
        CHECK(rel_gap(got, inst.x * b) < 1e-9);
        CHECK(st.max_drift < 1e-9);
    }
}
