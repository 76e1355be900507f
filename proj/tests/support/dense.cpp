#include "support/dense.hpp"

namespace drillex::testing {

DenseMatrix dense_features(const FeatureMatrixView &view, const Expanded &expanded)
{
    const auto n = static_cast<Eigen::Index>(expanded.rows.size());
    DenseMatrix x(n, static_cast<Eigen::Index>(view.num_columns()));
    for (Eigen::Index r = 0; r < n; ++r)
        for (std::size_t c = 0; c < view.num_columns(); ++c) {
            const std::size_t a = view.column_attr[c];
            const auto pos = view.store->level(a).position(expanded.rows[static_cast<std::size_t>(r)][a]);
            x(r, static_cast<Eigen::Index>(c)) = view.columns[c].values.at(*pos);
        }
    return x;
}

namespace {

Instance draw_instance(std::mt19937_64 &rng, const InstanceOptions &opt)
{
    std::uniform_real_distribution<double> coin(0, 1);
    std::normal_distribution<double> gauss(0, 1);
    Instance inst;
    inst.data = std::make_unique<Dataset>(random_dataset(rng, opt.shape));
    auto v = random_view(*inst.data, rng);
    auto order = attribute_order(inst.data->schema(), v.drilled, &v.depth);
    inst.store = std::make_unique<FactorStore>(FactorStore::build(*inst.data, order, v.filter));
    inst.expanded = brute_expand(*inst.data, order, v.filter);
    const auto &store = *inst.store;

    std::vector<FeatureMap> cols{intercept_feature(store)};
    for (std::size_t a = 0; a < store.num_attributes(); ++a) {
        const int k = std::uniform_int_distribution<int>(0, 2)(rng);
        for (int j = 0; j < k; ++j) {
            FeatureMap f;
            f.name = "f" + std::to_string(a) + "_" + std::to_string(j);
            f.attribute = store.attributes()[a];
            for (std::size_t p = 0; p < store.level(a).size(); ++p) f.values.push_back(gauss(rng));
            cols.push_back(std::move(f));
        }
    }
    std::shuffle(cols.begin(), cols.end(), rng);

    const std::size_t n = store.num_rows();
    std::vector<double> y(n);
    for (auto &t : y) t = 5 + 2 * gauss(rng);
    std::vector<std::uint8_t> inc;
    if (coin(rng) < opt.mask_probability) {
        inc.resize(n);
        for (auto &i : inc) i = coin(rng) < 0.8;
        inc[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1;
    }
    std::vector<bool> z(cols.size(), true);
    if (coin(rng) < opt.z_subset_probability)
        for (std::size_t c = 0; c < z.size(); ++c) z[c] = coin(rng) < 0.6;
    inst.view = build_view(store, std::move(cols), std::move(y), std::move(inc), std::move(z));
    inst.x = dense_features(inst.view, inst.expanded);
    return inst;
}

bool well_posed(const Instance &inst)
{
    Eigen::MatrixXd x = inst.x;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!inst.view.is_included(static_cast<std::uint64_t>(r))) x.row(r).setZero();
    if (inst.view.num_included() <= inst.view.num_columns()) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x);
    return es.eigenvalues().minCoeff() > 1e-8 * es.eigenvalues().maxCoeff();
}

} // namespace

Instance random_instance(std::mt19937_64 &rng, const InstanceOptions &opt)
{
    for (;;) {
        auto inst = draw_instance(rng, opt);
        if (!opt.well_posed || well_posed(inst)) return inst;
    }
}

DenseMatrix dense_cluster_z(const Instance &inst, std::uint64_t begin, std::uint64_t end)
{
    auto zc = inst.view.z_columns();
    DenseMatrix z = DenseMatrix::Zero(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(zc.size()));
    for (std::uint64_t r = begin; r < end; ++r) {
        if (!inst.view.is_included(r)) continue;
        for (std::size_t k = 0; k < zc.size(); ++k)
            z(static_cast<Eigen::Index>(r - begin), static_cast<Eigen::Index>(k)) =
                inst.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(zc[k]));
    }
    return z;
}

std::vector<std::uint64_t> dense_cluster_begins(const Expanded &expanded)
{
    std::vector<std::uint64_t> b;
    const auto &rows = expanded.rows;
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (r == 0 || !std::equal(rows[r].begin(), rows[r].end() - 1, rows[r - 1].begin())) b.push_back(r);
    b.push_back(rows.size());
    return b;
}

DenseProblem dense_problem(const Instance &inst)
{
    DenseProblem p;
    p.x = inst.x;
    auto zc = inst.view.z_columns();
    p.z.resize(inst.x.rows(), static_cast<Eigen::Index>(zc.size()));
    for (std::size_t k = 0; k < zc.size(); ++k) p.z.col(static_cast<Eigen::Index>(k)) = inst.x.col(static_cast<Eigen::Index>(zc[k]));
    p.y = Eigen::Map<const Eigen::VectorXd>(inst.view.y.data(), static_cast<Eigen::Index>(inst.view.y.size()));
    for (std::uint64_t r = 0; r < inst.view.num_rows(); ++r) p.included.push_back(inst.view.is_included(r));
    p.begins = dense_cluster_begins(inst.expanded);
    return p;
}

} // namespace drillex::testing
