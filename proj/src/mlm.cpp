#include "drillex/mlm.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace drillex {

namespace {

using Index = Eigen::Index;

Vector masked_y(const FeatureMatrixView &view)
{
    Vector y(static_cast<Index>(view.num_rows()));
    for (std::uint64_t r = 0; r < view.num_rows(); ++r)
        y[static_cast<Index>(r)] = view.is_included(r) ? view.y[r] : 0.0;
    return y;
}

/// y − Xβ on included rows, 0 elsewhere.
Vector residual(const FeatureMatrixView &view, const Vector &beta)
{
    DenseMatrix b = beta;
    DenseMatrix xb = right_mul(view, b);
    Vector r(static_cast<Index>(view.num_rows()));
    for (std::uint64_t i = 0; i < view.num_rows(); ++i)
        r[static_cast<Index>(i)] = view.is_included(i) ? view.y[i] - xb(static_cast<Index>(i), 0) : 0.0;
    return r;
}

double variance_floor(const FeatureMatrixView &view)
{
    double s = 0;
    for (std::uint64_t r = 0; r < view.num_rows(); ++r)
        if (view.is_included(r)) s += view.y[r] * view.y[r];
    const auto n = std::max<std::uint64_t>(1, view.num_included());
    return 1e-10 * std::max(1.0, s / static_cast<double>(n));
}

Vector solve_beta(const DenseMatrix &gram_inc, const Vector &rhs, double ridge)
{
    DenseMatrix a = gram_inc;
    a.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw DegenerateDesign("XᵀX + ridge is not positive definite");
    Vector beta = llt.solve(rhs);
    if (!beta.allFinite()) throw DegenerateDesign("fixed effects are not finite");
    return beta;
}

/// Cholesky of a covariance or precision, adding ridge·10^k·I until it succeeds.
Eigen::LLT<Eigen::MatrixXd> guarded_cholesky(const DenseMatrix &sigma, double ridge)
{
    Eigen::MatrixXd s = sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    double jitter = ridge;
    for (int k = 0; llt.info() != Eigen::Success; ++k) {
        if (k > 20 || !s.allFinite()) throw SingularSigma("covariance is not invertible");
        Eigen::MatrixXd t = s;
        t.diagonal().array() += jitter;
        llt.compute(t);
        jitter *= 10;
    }
    return llt;
}

DenseMatrix inverse_of(const Eigen::LLT<Eigen::MatrixXd> &llt)
{
    return llt.solve(Eigen::MatrixXd::Identity(llt.rows(), llt.cols()));
}

double log_det(const Eigen::LLT<Eigen::MatrixXd> &llt)
{
    return 2 * llt.matrixLLT().diagonal().array().log().sum();
}

std::vector<Vector> cluster_products(const FeatureMatrixView &view, const Vector &r)
{
    ClusterLeftIter it(view);
    std::vector<Vector> out;
    std::size_t c = 0;
    while (!it.done()) {
        const std::size_t i = it.next_cluster();
        Vector zr(static_cast<Index>(it.num_z()));
        it.next(r.segment(static_cast<Index>(it.layout().begin[i]), static_cast<Index>(it.layout().rows(i))), c, zr);
        out.push_back(std::move(zr));
    }
    return out;
}

double max_delta(const ModelParams &a, const ModelParams &b)
{
    double d = std::abs(a.sigma2 - b.sigma2);
    if (a.beta.size()) d = std::max(d, (a.beta - b.beta).cwiseAbs().maxCoeff());
    if (a.sigma_b.size()) d = std::max(d, (a.sigma_b - b.sigma_b).cwiseAbs().maxCoeff());
    return d;
}

ModelParams m_step_with(const ClusterPosteriors &post, const ModelParams &prev, const FeatureMatrixView &view,
                        const DecompAggs &aggs, const DenseMatrix &gram_inc, const TrainConfig &config)
{
    const auto n = static_cast<Index>(view.num_rows());
    // Z·b̂ by stacking the cluster blocks
    Vector zb(n);
    {
        ClusterRightIter it(view);
        std::size_t c = 0;
        while (!it.done()) {
            const std::size_t i = it.next_cluster();
            it.next(post.mu[i], c,
                    zb.segment(static_cast<Index>(it.layout().begin[i]), static_cast<Index>(it.layout().rows(i))));
        }
    }
    DenseMatrix target = (masked_y(view) - zb).transpose();
    Vector rhs = left_mul(target, view, aggs).transpose();

    ModelParams next;
    next.beta = solve_beta(gram_inc, rhs, config.ridge);

    const auto mz = static_cast<Index>(post.mu.empty() ? 0 : post.mu[0].size());
    next.sigma_b = DenseMatrix::Zero(mz, mz);
    std::size_t groups = 0;
    double trace = 0;
    for (std::size_t i = 0; i < post.mu.size(); ++i) {
        if (post.included[i] == 0) continue;
        DenseMatrix s = post.second_moment(i);
        next.sigma_b += s;
        trace += post.gram[i].cwiseProduct(s).sum(); // Tr(G S) with both symmetric
        ++groups;
    }
    if (groups > 0)
        next.sigma_b /= static_cast<double>(groups);
    else
        next.sigma_b = prev.sigma_b;
    next.sigma_b = (next.sigma_b + next.sigma_b.transpose()) / 2;

    Vector r = residual(view, next.beta);
    const double n_eff = static_cast<double>(std::max<std::uint64_t>(1, view.num_included()));
    const double s2 = (r.squaredNorm() + trace - 2 * r.dot(zb)) / n_eff;
    next.sigma2 = std::max(s2, variance_floor(view));
    return next;
}

} // namespace

ModelParams init(const FeatureMatrixView &view, const DecompAggs &aggs, const TrainConfig &config)
{
    DenseMatrix g = gram_included(view, aggs);
    DenseMatrix target = masked_y(view).transpose();
    Vector rhs = left_mul(target, view, aggs).transpose();
    ModelParams p;
    p.beta = solve_beta(g, rhs, config.ridge);
    Vector r = residual(view, p.beta);
    const double n_eff = static_cast<double>(std::max<std::uint64_t>(1, view.num_included()));
    p.sigma2 = std::max(r.squaredNorm() / n_eff, variance_floor(view));
    const auto mz = static_cast<Index>(view.z_columns().size());
    p.sigma_b = p.sigma2 * DenseMatrix::Identity(mz, mz);
    return p;
}

ClusterPosteriors e_step(const ModelParams &params, const FeatureMatrixView &view, const TrainConfig &config)
{
    ClusterPosteriors post;
    const Vector r = residual(view, params.beta);
    auto zr = cluster_products(view, r);
    const DenseMatrix sigma_inv = inverse_of(guarded_cholesky(params.sigma_b, config.ridge));

    ClusterGramIter it(view);
    post.layout = it.layout();
    const std::size_t k = post.layout.size();
    post.mu.resize(k);
    post.v.resize(k);
    post.gram.resize(k);
    post.included.resize(k);
    std::size_t i = 0;
    DenseMatrix g;
    while (it.next(i, g)) {
        std::uint64_t inc = 0;
        for (std::uint64_t row = post.layout.begin[i]; row < post.layout.begin[i + 1]; ++row) inc += view.is_included(row);
        post.included[i] = inc;
        post.v[i] = inverse_of(guarded_cholesky(g / params.sigma2 + sigma_inv, config.ridge));
        post.mu[i] = post.v[i] * zr[i] / params.sigma2;
        post.gram[i] = std::move(g);
        g = DenseMatrix();
    }
    return post;
}

ModelParams m_step(const ClusterPosteriors &post, const ModelParams &params, const FeatureMatrixView &view,
                   const DecompAggs &aggs, const TrainConfig &config)
{
    return m_step_with(post, params, view, aggs, gram_included(view, aggs), config);
}

double log_likelihood(const ModelParams &params, const FeatureMatrixView &view, const TrainConfig &config)
{
    const Vector r = residual(view, params.beta);
    auto zr = cluster_products(view, r);
    const auto chol = guarded_cholesky(params.sigma_b, config.ridge);
    const DenseMatrix sigma_inv = inverse_of(chol);
    const double logdet_sigma = log_det(chol);
    const double s2 = params.sigma2;

    ClusterGramIter it(view);
    const auto &layout = it.layout();
    double ll = 0;
    std::size_t i = 0;
    DenseMatrix g;
    while (it.next(i, g)) {
        double rr = 0, ni = 0;
        for (std::uint64_t row = layout.begin[i]; row < layout.begin[i + 1]; ++row) {
            if (!view.is_included(row)) continue;
            rr += r[static_cast<Index>(row)] * r[static_cast<Index>(row)];
            ni += 1;
        }
        if (ni == 0) continue;
        // Woodbury and the determinant lemma on σ²I + ZΣZᵀ
        const auto a = guarded_cholesky(g / s2 + sigma_inv, config.ridge);
        const double logdet = ni * std::log(s2) + logdet_sigma + log_det(a);
        const double quad = rr / s2 - zr[i].dot(a.solve(zr[i])) / (s2 * s2);
        ll -= 0.5 * (ni * std::log(2 * std::numbers::pi) + logdet + quad);
    }
    return ll;
}

FitResult fit(const FeatureMatrixView &view, const DecompAggs &aggs, const TrainConfig &config)
{
    FitResult out;
    const DenseMatrix g = gram_included(view, aggs);
    out.params = init(view, aggs, config);
    out.log_likelihood.push_back(log_likelihood(out.params, view, config));
    for (int it = 0; it < config.max_iterations; ++it) {
        auto post = e_step(out.params, view, config);
        ModelParams next = m_step_with(post, out.params, view, aggs, g, config);
        const double delta = max_delta(next, out.params);
        out.params = std::move(next);
        ++out.iterations;
        out.log_likelihood.push_back(log_likelihood(out.params, view, config));
        if (delta < config.tolerance) {
            out.converged = true;
            break;
        }
    }
    out.posteriors = e_step(out.params, view, config);
    return out;
}

namespace {

double predict_at(const FitResult &model, const FeatureMatrixView &view, std::uint64_t row, std::size_t cluster)
{
    const Vector x = feature_row(view, row);
    double y = x.dot(model.params.beta);
    const auto zc = view.z_columns();
    const Vector &mu = model.posteriors.mu.at(cluster);
    for (std::size_t k = 0; k < zc.size(); ++k) y += x[static_cast<Index>(zc[k])] * mu[static_cast<Index>(k)];
    return y;
}

} // namespace

double predict_row(const FitResult &model, const FeatureMatrixView &view, std::uint64_t row)
{
    if (row >= view.num_rows()) throw UnknownGroup("row " + std::to_string(row) + " is not in the store");
    return predict_at(model, view, row, model.posteriors.layout.cluster_of(row));
}

double predict(const FitResult &model, const FeatureMatrixView &view, const GroupKey &key)
{
    auto row = view.store->find_row(key);
    if (!row) throw UnknownGroup("group is not in the store");
    return predict_row(model, view, *row);
}

std::vector<double> predict_cluster(const FitResult &model, const FeatureMatrixView &view, std::size_t cluster)
{
    const auto &layout = model.posteriors.layout;
    if (cluster >= layout.size()) throw UnknownGroup("cluster " + std::to_string(cluster) + " out of range");
    std::vector<double> out;
    for (std::uint64_t r = layout.begin[cluster]; r < layout.begin[cluster + 1]; ++r)
        out.push_back(predict_at(model, view, r, cluster));
    return out;
}

} // namespace drillex
