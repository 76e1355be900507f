#include "drillex/errors.hpp"
#include "drillex/mlm.hpp"
#include "support/dense.hpp"

#include <doctest.h>

using namespace drillex;
using namespace drillex::testing;

namespace {

double rel(const Eigen::MatrixXd &got, const Eigen::MatrixXd &want)
{
    if (want.size() == 0) return 0;
    return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

InstanceOptions posed()
{
    InstanceOptions o;
    o.well_posed = true;
    return o;
}

} // namespace

TEST_CASE("init matches dense ridge least squares")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 150; ++trial) {
        auto inst = random_instance(rng, posed());
        auto p = init(inst.view, compute_all(*inst.store));
        auto d = dense_init(dense_problem(inst), 1e-6);
        CHECK(rel(p.beta, d.beta) < 1e-9);
        CHECK(rel(p.sigma2, d.sigma2) < 1e-9);
        CHECK(rel(p.sigma_b, d.sigma_b) < 1e-9);
    }
}

TEST_CASE("single steps match the dense reference")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 150; ++trial) {
        auto inst = random_instance(rng, posed());
        auto aggs = compute_all(*inst.store);
        auto prob = dense_problem(inst);
        auto p0 = init(inst.view, aggs);
        auto d0 = dense_init(prob, 1e-6);
        auto post = e_step(p0, inst.view);
        auto dpost = dense_e_step(prob, d0, 1e-6);
        REQUIRE(post.mu.size() == dpost.mu.size());
        for (std::size_t i = 0; i < post.mu.size(); ++i) {
            CHECK(rel(post.mu[i], dpost.mu[i]) < 1e-9);
            CHECK(rel(post.v[i], dpost.v[i]) < 1e-9);
        }
        auto p1 = m_step(post, p0, inst.view, aggs);
        auto d1 = dense_m_step(prob, dpost, d0, 1e-6);
        CHECK(rel(p1.beta, d1.beta) < 1e-9);
        CHECK(rel(p1.sigma_b, d1.sigma_b) < 1e-9);
        CHECK(rel(p1.sigma2, d1.sigma2) < 1e-9);
        CHECK(rel(log_likelihood(p1, inst.view), dense_log_likelihood(prob, d1, 1e-6)) < 1e-9);
    }
}

TEST_CASE("fit matches the dense EM and never lowers the likelihood")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 120; ++trial) {
        auto inst = random_instance(rng, posed());
        auto f = fit(inst.view, compute_all(*inst.store));
        auto prob = dense_problem(inst);
        auto d = dense_fit(prob, 20, 1e-6, 1e-8);
        CHECK(f.iterations == d.iterations);
        CHECK(rel(f.params.beta, d.params.beta) < 1e-6);
        CHECK(rel(f.params.sigma_b, d.params.sigma_b) < 1e-6);
        CHECK(rel(f.params.sigma2, d.params.sigma2) < 1e-6);
        for (std::size_t k = 1; k < f.log_likelihood.size(); ++k)
            CHECK(f.log_likelihood[k] >= f.log_likelihood[k - 1] - 1e-8 * std::max(1.0, std::abs(f.log_likelihood[k - 1])));
        auto yd = dense_predict(prob, d);
        for (std::uint64_t r = 0; r < inst.view.num_rows(); ++r)
            CHECK(rel(predict_row(f, inst.view, r), yd[static_cast<Eigen::Index>(r)]) < 1e-6);
    }
}

TEST_CASE("noiseless linear data is recovered by init")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        auto inst = random_instance(rng, {{}, 0.0, 0.0, true});
        Eigen::VectorXd beta = Eigen::VectorXd::NullaryExpr(inst.x.cols(), [&] { return g(rng); });
        Eigen::VectorXd y = inst.x * beta;
        inst.view.y.assign(y.data(), y.data() + y.size());
        auto p = init(inst.view, compute_all(*inst.store));
        CHECK((inst.x * p.beta - y).cwiseAbs().maxCoeff() < 1e-4);
        CHECK(p.sigma2 < 1e-8 * std::max(1.0, y.squaredNorm()));
    }
}

TEST_CASE("noiseless per-cluster linear data is fit after 20 iterations")
{
    // 4 clusters of 8 rows; intercept and one slope vary by cluster
    DatasetSchema s;
    s.hierarchies = {{"A", {"a"}}, {"B", {"b"}}};
    s.measures = {"m"};
    std::vector<std::vector<std::string>> rows;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 8; ++b) rows.push_back({"a" + std::to_string(a), "b" + std::to_string(b), "1"});
    auto d = Dataset::from_table(make_table({"a", "b", "m"}, rows), s);
    auto store = FactorStore::build(d, attribute_order(s, "B"), {});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        FeatureMap f{"f", "b", FeatureKind::Custom, {}};
        for (int i = 0; i < 8; ++i) f.values.push_back(g(rng));
        std::vector<double> b0, b1, y;
        for (int a = 0; a < 4; ++a) b0.push_back(g(rng)), b1.push_back(g(rng));
        for (std::uint64_t r = 0; r < 32; ++r) y.push_back(2 + b0[r / 8] + (1.5 + b1[r / 8]) * f.values[r % 8]);
        auto view = build_view(store, {intercept_feature(store), f}, y);
        auto m = fit(view, compute_all(store));
        for (std::uint64_t r = 0; r < 32; ++r) CHECK(std::abs(predict_row(m, view, r) - y[r]) < 1e-4);
    }
}

TEST_CASE("zero iterations and empty z")
{
    std::mt19937_64 rng(7);
    auto inst = random_instance(rng);
    auto aggs = compute_all(*inst.store);
    TrainConfig c;
    c.max_iterations = 0;
    auto f = fit(inst.view, aggs, c);
    auto p = init(inst.view, aggs);
    CHECK(f.iterations == 0);
    CHECK(rel(f.params.beta, p.beta) == 0);

    inst.view.z_mask.assign(inst.view.num_columns(), false);
    auto lin = fit(inst.view, aggs);
    for (std::uint64_t r = 0; r < inst.view.num_rows(); ++r)
        CHECK(predict_row(lin, inst.view, r) == doctest::Approx(feature_row(inst.view, r).dot(lin.params.beta)));
}

TEST_CASE("zero feature column is handled by the ridge")
{
    auto data = village_dataset();
    auto s = FactorStore::build(data, attribute_order(data.schema(), "Geo"), {});
    std::vector<FeatureMap> cols{intercept_feature(s), {"zero", "V", FeatureKind::Custom, {0, 0, 0}}};
    auto view = build_view(s, cols, {1, 2, 3, 4, 5, 6});
    auto p = init(view, compute_all(s));
    CHECK(p.beta.allFinite());
    CHECK(p.beta[1] == 0);
}

TEST_CASE("large random-effect variance gives per-cluster least squares")
{
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_instance(rng, {{}, 0.0, 0.0});
        auto aggs = compute_all(*inst.store);
        auto p = init(inst.view, aggs);
        const auto mz = static_cast<Eigen::Index>(inst.view.z_columns().size());
        p.sigma_b = 1e8 * DenseMatrix::Identity(mz, mz);
        auto post = e_step(p, inst.view);
        auto prob = dense_problem(inst);
        for (std::size_t i = 0; i + 1 < prob.begins.size(); ++i) {
            const auto b = static_cast<Eigen::Index>(prob.begins[i]);
            const auto n = static_cast<Eigen::Index>(prob.begins[i + 1] - prob.begins[i]);
            Eigen::MatrixXd zi = prob.z.middleRows(b, n);
            Eigen::VectorXd ri = prob.y.segment(b, n) - prob.x.middleRows(b, n) * p.beta;
            // fitted residuals agree even when Zᵢ is rank deficient
            Eigen::VectorXd ols = zi * zi.completeOrthogonalDecomposition().solve(ri);
            CHECK((zi * post.mu[i] - ols).cwiseAbs().maxCoeff() < 1e-3 * std::max(1.0, ri.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("predict by group key")
{
    std::mt19937_64 rng(2);
    auto inst = random_instance(rng);
    auto f = fit(inst.view, compute_all(*inst.store));
    for (std::uint64_t r = 0; r < inst.view.num_rows(); ++r)
        CHECK(predict(f, inst.view, inst.store->group_key(r)) == predict_row(f, inst.view, r));
    CHECK_THROWS_AS(predict(f, inst.view, {{"nope", "x"}}), UnknownGroup);
    CHECK_THROWS_AS(predict_row(f, inst.view, inst.view.num_rows()), UnknownGroup);
    auto c = predict_cluster(f, inst.view, 0);
    CHECK(c.size() == f.posteriors.layout.rows(0));
}

TEST_CASE("predictions do not depend on hierarchy declaration order")
{
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0, 1);
    int compared = 0;
    for (int trial = 0; trial < 60; ++trial) {
        auto data = random_dataset(rng);
        if (data.schema().hierarchies.size() < 2) continue;
        auto v = random_view(data, rng);
        DatasetSchema rs = data.schema();
        std::reverse(rs.hierarchies.begin(), rs.hierarchies.end());
        auto rdata = Dataset::from_table(data.raw(), rs);
        std::vector<std::size_t> rdepth(v.depth.rbegin(), v.depth.rend());
        auto s1 = FactorStore::build(data, attribute_order(data.schema(), v.drilled, &v.depth), v.filter);
        auto s2 = FactorStore::build(rdata, attribute_order(rs, v.drilled, &rdepth), v.filter);
        REQUIRE(s1.num_rows() == s2.num_rows());

        // one feature per attribute, keyed by value name
        std::map<std::pair<std::string, std::string>, double> fv;
        for (std::size_t a = 0; a < s1.num_attributes(); ++a)
            for (std::uint32_t p = 0; p < s1.level(a).size(); ++p) fv[{s1.attributes()[a], s1.level(a).name(p)}] = g(rng);
        auto columns = [&](const FactorStore &s) {
            std::vector<FeatureMap> cols{intercept_feature(s)};
            for (std::size_t a = 0; a < s.num_attributes(); ++a) {
                FeatureMap f{"f:" + s.attributes()[a], s.attributes()[a], FeatureKind::Custom, {}};
                for (std::uint32_t p = 0; p < s.level(a).size(); ++p) f.values.push_back(fv[{s.attributes()[a], s.level(a).name(p)}]);
                cols.push_back(std::move(f));
            }
            return cols;
        };
        std::map<GroupKey, double> y;
        for (std::uint64_t r = 0; r < s1.num_rows(); ++r) y[s1.group_key(r)] = 3 + g(rng);
        auto target = [&](const FactorStore &s) {
            std::vector<double> out;
            for (std::uint64_t r = 0; r < s.num_rows(); ++r) out.push_back(y.at(s.group_key(r)));
            return out;
        };
        auto v1 = build_view(s1, columns(s1), target(s1));
        auto v2 = build_view(s2, columns(s2), target(s2));
        auto f1 = fit(v1, compute_all(s1));
        auto f2 = fit(v2, compute_all(s2));
        for (std::uint64_t r = 0; r < s1.num_rows(); ++r) {
            const double a = predict_row(f1, v1, r), b = predict(f2, v2, s1.group_key(r));
            CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
        }
        ++compared;
    }
    CHECK(compared > 20);
}
