#include "support/dense_em.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace drillex::testing {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Rows
{
    MatrixXd x, z;
    VectorXd y;
};

Rows cluster_rows(const DenseProblem &p, std::size_t i)
{
    std::vector<Eigen::Index> keep;
    for (auto r = p.begins[i]; r < p.begins[i + 1]; ++r)
        if (p.included[r]) keep.push_back(static_cast<Eigen::Index>(r));
    Rows out{MatrixXd(keep.size(), p.x.cols()), MatrixXd(keep.size(), p.z.cols()), VectorXd(keep.size())};
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.x.row(static_cast<Eigen::Index>(k)) = p.x.row(keep[k]);
        out.z.row(static_cast<Eigen::Index>(k)) = p.z.row(keep[k]);
        out.y[static_cast<Eigen::Index>(k)] = p.y[keep[k]];
    }
    return out;
}

Rows all_rows(const DenseProblem &p)
{
    Rows out{p.x, p.z, p.y};
    for (Eigen::Index r = 0; r < p.x.rows(); ++r)
        if (!p.included[static_cast<std::size_t>(r)]) {
            out.x.row(r).setZero();
            out.z.row(r).setZero();
            out.y[r] = 0;
        }
    return out;
}

double n_eff(const DenseProblem &p)
{
    return std::max<double>(1, static_cast<double>(std::count(p.included.begin(), p.included.end(), true)));
}

double floor_of(const DenseProblem &p)
{
    double s = 0;
    for (Eigen::Index r = 0; r < p.y.rows(); ++r)
        if (p.included[static_cast<std::size_t>(r)]) s += p.y[r] * p.y[r];
    return 1e-10 * std::max(1.0, s / n_eff(p));
}

VectorXd ridge_solve(const MatrixXd &x, const VectorXd &t, double ridge)
{
    MatrixXd a = x.transpose() * x + ridge * MatrixXd::Identity(x.cols(), x.cols());
    return a.llt().solve(x.transpose() * t);
}

MatrixXd guarded(const MatrixXd &s, double ridge)
{
    Eigen::LLT<MatrixXd> llt(s);
    double jitter = ridge;
    for (int k = 0; llt.info() != Eigen::Success; ++k) {
        if (k > 20) throw std::runtime_error("singular");
        llt.compute(s + jitter * MatrixXd::Identity(s.rows(), s.cols()));
        jitter *= 10;
    }
    return llt.reconstructedMatrix();
}

} // namespace

DenseParams dense_init(const DenseProblem &p, double ridge)
{
    auto a = all_rows(p);
    DenseParams out;
    out.beta = ridge_solve(a.x, a.y, ridge);
    out.sigma2 = std::max((a.y - a.x * out.beta).squaredNorm() / n_eff(p), floor_of(p));
    out.sigma_b = out.sigma2 * MatrixXd::Identity(p.z.cols(), p.z.cols());
    return out;
}

DensePosterior dense_e_step(const DenseProblem &p, const DenseParams &params, double ridge)
{
    DensePosterior post;
    const MatrixXd sigma_inv = guarded(params.sigma_b, ridge).inverse();
    for (std::size_t i = 0; i + 1 < p.begins.size(); ++i) {
        auto c = cluster_rows(p, i);
        MatrixXd v = guarded(c.z.transpose() * c.z / params.sigma2 + sigma_inv, ridge).inverse();
        VectorXd mu = v * c.z.transpose() * (c.y - c.x * params.beta) / params.sigma2;
        post.v.push_back(v);
        post.mu.push_back(mu);
    }
    return post;
}

DenseParams dense_m_step(const DenseProblem &p, const DensePosterior &post, const DenseParams &prev, double ridge)
{
    auto a = all_rows(p);
    VectorXd zb = VectorXd::Zero(p.y.rows());
    for (std::size_t i = 0; i + 1 < p.begins.size(); ++i) {
        const auto b = static_cast<Eigen::Index>(p.begins[i]);
        const auto n = static_cast<Eigen::Index>(p.begins[i + 1] - p.begins[i]);
        zb.segment(b, n) = a.z.middleRows(b, n) * post.mu[i];
    }
    DenseParams out;
    out.beta = ridge_solve(a.x, a.y - zb, ridge);
    out.sigma_b = MatrixXd::Zero(p.z.cols(), p.z.cols());
    double groups = 0, trace = 0;
    for (std::size_t i = 0; i + 1 < p.begins.size(); ++i) {
        auto c = cluster_rows(p, i);
        if (c.y.size() == 0) continue;
        MatrixXd s = post.v[i] + post.mu[i] * post.mu[i].transpose();
        out.sigma_b += s;
        trace += (c.z.transpose() * c.z * s).trace();
        groups += 1;
    }
    out.sigma_b = groups > 0 ? MatrixXd(out.sigma_b / groups) : prev.sigma_b;
    out.sigma_b = (out.sigma_b + out.sigma_b.transpose()) / 2;
    VectorXd r = a.y - a.x * out.beta;
    out.sigma2 = std::max((r.squaredNorm() + trace - 2 * r.dot(zb)) / n_eff(p), floor_of(p));
    return out;
}

double dense_log_likelihood(const DenseProblem &p, const DenseParams &params, double ridge)
{
    const MatrixXd sigma = guarded(params.sigma_b, ridge);
    double ll = 0;
    for (std::size_t i = 0; i + 1 < p.begins.size(); ++i) {
        auto c = cluster_rows(p, i);
        if (c.y.size() == 0) continue;
        MatrixXd omega = params.sigma2 * MatrixXd::Identity(c.y.size(), c.y.size()) + c.z * sigma * c.z.transpose();
        Eigen::LDLT<MatrixXd> llt(omega);
        VectorXd r = c.y - c.x * params.beta;
        const double logdet = llt.vectorD().array().log().sum();
        ll -= 0.5 * (static_cast<double>(c.y.size()) * std::log(2 * std::numbers::pi) + logdet + r.dot(llt.solve(r)));
    }
    return ll;
}

DenseFit dense_fit(const DenseProblem &p, int max_iterations, double ridge, double tolerance)
{
    DenseFit f;
    f.params = dense_init(p, ridge);
    f.log_likelihood.push_back(dense_log_likelihood(p, f.params, ridge));
    for (int it = 0; it < max_iterations; ++it) {
        auto post = dense_e_step(p, f.params, ridge);
        auto next = dense_m_step(p, post, f.params, ridge);
        double d = std::abs(next.sigma2 - f.params.sigma2);
        if (next.beta.size()) d = std::max(d, (next.beta - f.params.beta).cwiseAbs().maxCoeff());
        if (next.sigma_b.size()) d = std::max(d, (next.sigma_b - f.params.sigma_b).cwiseAbs().maxCoeff());
        f.params = next;
        ++f.iterations;
        f.log_likelihood.push_back(dense_log_likelihood(p, f.params, ridge));
        if (d < tolerance) break;
    }
    f.post = dense_e_step(p, f.params, ridge);
    return f;
}

Eigen::VectorXd dense_predict(const DenseProblem &p, const DenseFit &f)
{
    VectorXd out = p.x * f.params.beta;
    for (std::size_t i = 0; i + 1 < p.begins.size(); ++i) {
        const auto b = static_cast<Eigen::Index>(p.begins[i]);
        const auto n = static_cast<Eigen::Index>(p.begins[i + 1] - p.begins[i]);
        out.segment(b, n) += p.z.middleRows(b, n) * f.post.mu[i];
    }
    return out;
}

} // namespace drillex::testing
