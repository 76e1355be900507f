#pragma once

#include "drillex/aggregates.hpp"
#include "drillex/features.hpp"
#include "drillex/fmatrix.hpp"

#include <cstdint>
#include <vector>

namespace drillex {

/// y = Xβ + Z b_i + ε per cluster i, with b_i ~ N(0, Σ) and ε ~ N(0, σ² I).
struct ModelParams
{
    Vector beta;        ///< m
    DenseMatrix sigma_b; ///< m_z × m_z
    double sigma2 = 1;
};

struct ClusterPosteriors
{
    std::vector<Vector> mu;        ///< E[b_i]
    std::vector<DenseMatrix> v;    ///< Cov[b_i]
    std::vector<DenseMatrix> gram; ///< ZᵢᵀZᵢ over included rows
    std::vector<std::uint64_t> included; ///< included rows per cluster
    ClusterLayout layout;

    /// E[b_i b_iᵀ] = V_i + μ_i μ_iᵀ
    DenseMatrix second_moment(std::size_t i) const { return v[i] + mu[i] * mu[i].transpose(); }
};

struct TrainConfig
{
    int max_iterations = 20;
    double ridge = 1e-6;
    double tolerance = 1e-8;
};

struct FitResult
{
    ModelParams params;
    ClusterPosteriors posteriors;
    int iterations = 0;
    bool converged = false;
    std::vector<double> log_likelihood; ///< after init and after every iteration
};

/// Ridge least squares; σ² and Σ = σ² I from its residual variance.  Throws DegenerateDesign.
ModelParams init(const FeatureMatrixView &view, const DecompAggs &aggs, const TrainConfig &config = {});

/// Throws SingularSigma.
ClusterPosteriors e_step(const ModelParams &params, const FeatureMatrixView &view, const TrainConfig &config = {});

/// Throws DegenerateDesign.
ModelParams m_step(const ClusterPosteriors &post, const ModelParams &params, const FeatureMatrixView &view,
                   const DecompAggs &aggs, const TrainConfig &config = {});

/// Marginal log-likelihood of the included rows.
double log_likelihood(const ModelParams &params, const FeatureMatrixView &view, const TrainConfig &config = {});

FitResult fit(const FeatureMatrixView &view, const DecompAggs &aggs, const TrainConfig &config = {});

/// x·β + z·μ_i for the group's row.  Throws UnknownGroup.
double predict(const FitResult &model, const FeatureMatrixView &view, const GroupKey &key);
double predict_row(const FitResult &model, const FeatureMatrixView &view, std::uint64_t row);
/// Predictions for every row of `cluster`, in row order.
std::vector<double> predict_cluster(const FitResult &model, const FeatureMatrixView &view, std::size_t cluster);

} // namespace drillex
