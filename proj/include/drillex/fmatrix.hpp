#pragma once

#include "drillex/aggregates.hpp"
#include "drillex/features.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <vector>

namespace drillex {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// XᵀX from the count aggregates; only the upper triangle is computed.
DenseMatrix gram(const FeatureMatrixView &view, const DecompAggs &aggs);
/// XᵀX over the included rows only.
DenseMatrix gram_included(const FeatureMatrixView &view, const DecompAggs &aggs);

/// A·X for A of shape q×n, using prefix sums over each row of A.  Throws ShapeMismatch.
DenseMatrix left_mul(const DenseMatrix &a, const FeatureMatrixView &view, const DecompAggs &aggs);

struct RightMulStats
{
    std::uint64_t refreshes = 0;
    double max_drift = 0; ///< largest relative gap between incremental and fresh row sums
};

/// X·B for B of shape m×p.  Row k is row k-1 plus the contribution change of the attributes that
/// changed; sums are recomputed from scratch every `refresh_every` rows.  Throws ShapeMismatch.
DenseMatrix right_mul(const FeatureMatrixView &view, const DenseMatrix &b, RightMulStats *stats = nullptr,
                      std::uint64_t refresh_every = 1024);

/// Dense n×m expansion.  Throws BudgetExceeded when n·m exceeds `max_cells`.
DenseMatrix materialize(const FeatureMatrixView &view, std::uint64_t max_cells = 50'000'000);

/// Feature row of logical row `row`.
Vector feature_row(const FeatureMatrixView &view, std::uint64_t row);

/** Clusters of the multi-level model: rows sharing every attribute except the last (the
 * drill-down attribute).  Clusters are contiguous row ranges. */
struct ClusterLayout
{
    std::vector<std::size_t> inter_attributes;
    std::size_t intra_attribute = 0;
    std::vector<std::uint64_t> begin; ///< size() + 1 offsets

    std::size_t size() const { return begin.empty() ? 0 : begin.size() - 1; }
    std::uint64_t rows(std::size_t i) const { return begin[i + 1] - begin[i]; }
    std::size_t cluster_of(std::uint64_t row) const;
};

ClusterLayout cluster_layout(const FactorStore &store);

/** Shared state of the per-cluster iterators: inter-cluster features (z columns only) kept up to
 * date incrementally from cluster to cluster, intra-cluster feature sums cached per parent. */
class ClusterCursor
{
  public:
    explicit ClusterCursor(const FeatureMatrixView &view);

    const ClusterLayout &layout() const { return layout_; }
    std::size_t num_z() const { return z_.size(); }
    /// Index of the cluster the next call to advance() moves to.
    std::size_t next_cluster() const { return next_; }
    bool done() const { return next_ >= layout_.size(); }

  protected:
    bool advance();

    const FeatureMatrixView &view_;
    ClusterLayout layout_;
    std::vector<std::size_t> z_;     ///< z columns
    std::vector<std::size_t> inter_; ///< indices into z_ of columns on inter attributes
    std::vector<std::size_t> intra_; ///< indices into z_ of columns on the intra attribute
    Vector u_;                       ///< inter feature values, aligned with inter_
    std::uint32_t intra_begin_ = 0, intra_end_ = 0;
    std::uint32_t parent_ = 0;
    std::size_t current_ = 0;
    std::size_t next_ = 0;

  private:
    std::vector<std::uint32_t> positions_;
    bool fresh_ = true;
};

/// Yields ZᵢᵀZᵢ (z columns, included rows) per cluster into a caller-owned buffer.
class ClusterGramIter : public ClusterCursor
{
  public:
    explicit ClusterGramIter(const FeatureMatrixView &view) : ClusterCursor(view) { }
    bool next(std::size_t &cluster, DenseMatrix &out);

  private:
    struct IntraSums
    {
        Vector s1;
        DenseMatrix s2;
    };
    std::map<std::uint32_t, IntraSums> cache_;
};

/// Yields Dᵢ·Zᵢ (length num_z) for the caller's Dᵢ (length rows(i)); excluded rows count as 0.
class ClusterLeftIter : public ClusterCursor
{
  public:
    explicit ClusterLeftIter(const FeatureMatrixView &view) : ClusterCursor(view) { }
    bool next(const Eigen::Ref<const Vector> &d, std::size_t &cluster, Eigen::Ref<Vector> out);
};

/// Yields Zᵢ·Cᵢ (length rows(i)) for the caller's Cᵢ (length num_z); excluded rows give 0.
class ClusterRightIter : public ClusterCursor
{
  public:
    explicit ClusterRightIter(const FeatureMatrixView &view) : ClusterCursor(view) { }
    bool next(const Eigen::Ref<const Vector> &c, std::size_t &cluster, Eigen::Ref<Vector> out);
};

} // namespace drillex
