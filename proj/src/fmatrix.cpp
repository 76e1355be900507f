#include "drillex/fmatrix.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <cmath>

namespace drillex {

namespace {

/// Σ_pos CNT'(pos) · f(pos) over the column's own block.
double block_weighted_sum(const DecompAggs &aggs, std::size_t attr, const std::vector<double> &f)
{
    const auto &cnt = aggs.block(aggs.block_of(attr)).cnt_pos[aggs.level_of(attr)];
    double s = 0;
    for (std::size_t p = 0; p < cnt.size(); ++p) s += static_cast<double>(cnt[p]) * f[p];
    return s;
}

void check_aggs(const FeatureMatrixView &view, const DecompAggs &aggs)
{
    if (aggs.fingerprint() != view.store->fingerprint()) throw StaleAggs("aggregates were computed for another store");
}

} // namespace

DenseMatrix gram(const FeatureMatrixView &view, const DecompAggs &aggs)
{
    check_aggs(view, aggs);
    const std::size_t m = view.num_columns();
    DenseMatrix g = DenseMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<double> wsum(m);
    for (std::size_t c = 0; c < m; ++c) wsum[c] = block_weighted_sum(aggs, view.column_attr[c], view.columns[c].values);

    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = p; q < m; ++q) {
            // column order follows attribute order, so attr(q) is the deeper one
            const std::size_t s = view.column_attr[p], d = view.column_attr[q];
            const auto &fs = view.columns[p].values;
            const auto &fd = view.columns[q].values;
            double v = 0;
            if (s == d) {
                const auto &cnt = aggs.block(aggs.block_of(s)).cnt_pos[aggs.level_of(s)];
                for (std::size_t i = 0; i < cnt.size(); ++i) v += static_cast<double>(cnt[i]) * fs[i] * fd[i];
                v *= static_cast<double>(aggs.replication(s) * aggs.zoom(aggs.block_of(s)));
            } else if (aggs.block_of(s) == aggs.block_of(d)) {
                const std::size_t b = aggs.block_of(s);
                const auto &cof = aggs.block(b).cof_pos.at({aggs.level_of(d), aggs.level_of(s)});
                for (const auto &[pd, ps, c] : cof) v += static_cast<double>(c) * fd[pd] * fs[ps];
                v *= static_cast<double>(aggs.replication(s) * aggs.zoom(b));
            } else {
                const std::uint64_t td = aggs.block(aggs.block_of(d)).total;
                const std::uint64_t ts = aggs.block(aggs.block_of(s)).total;
                v = static_cast<double>(aggs.rows() / (td * ts)) * wsum[p] * wsum[q];
            }
            g(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = v;
            g(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = v;
        }
    }
    return g;
}

Vector feature_row(const FeatureMatrixView &view, std::uint64_t row)
{
    auto pos = view.store->row_at(row);
    Vector x(static_cast<Eigen::Index>(view.num_columns()));
    for (std::size_t c = 0; c < view.num_columns(); ++c)
        x[static_cast<Eigen::Index>(c)] = view.columns[c].values[pos[view.column_attr[c]]];
    return x;
}

DenseMatrix gram_included(const FeatureMatrixView &view, const DecompAggs &aggs)
{
    DenseMatrix g = gram(view, aggs);
    if (view.all_included()) return g;
    for (std::uint64_t r = 0; r < view.num_rows(); ++r) {
        if (view.is_included(r)) continue;
        Vector x = feature_row(view, r);
        g.noalias() -= x * x.transpose();
    }
    return g;
}

DenseMatrix left_mul(const DenseMatrix &a, const FeatureMatrixView &view, const DecompAggs &aggs)
{
    check_aggs(view, aggs);
    const std::uint64_t n = view.num_rows();
    if (static_cast<std::uint64_t>(a.cols()) != n)
        throw ShapeMismatch("left operand has " + std::to_string(a.cols()) + " columns, matrix has " +
                            std::to_string(n) + " rows");
    const std::size_t m = view.num_columns();
    DenseMatrix out = DenseMatrix::Zero(a.rows(), static_cast<Eigen::Index>(m));
    if (a.rows() == 0) return out;

    std::vector<double> prefix(n + 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        prefix[0] = 0;
        for (std::uint64_t r = 0; r < n; ++r) prefix[r + 1] = prefix[r] + a(i, static_cast<Eigen::Index>(r));

        std::size_t c = 0;
        while (c < m) {
            const std::size_t attr = view.column_attr[c];
            const std::size_t dom = view.store->level(attr).size();
            const std::uint64_t period = aggs.total(attr);
            const std::uint64_t reps = aggs.replication(attr);
            // range sum of the input row over every occurrence of each value
            std::vector<double> range(dom, 0.0);
            for (std::uint64_t rep = 0; rep < reps; ++rep) {
                std::uint64_t start = rep * period;
                for (std::uint32_t p = 0; p < dom; ++p) {
                    const std::uint64_t end = start + aggs.count(attr, p);
                    range[p] += prefix[end] - prefix[start];
                    start = end;
                }
            }
            for (; c < m && view.column_attr[c] == attr; ++c) {
                const auto &f = view.columns[c].values;
                double s = 0;
                for (std::uint32_t p = 0; p < dom; ++p) s += f[p] * range[p];
                out(i, static_cast<Eigen::Index>(c)) = s;
            }
        }
    }
    return out;
}

DenseMatrix right_mul(const FeatureMatrixView &view, const DenseMatrix &b, RightMulStats *stats,
                      std::uint64_t refresh_every)
{
    const std::size_t m = view.num_columns();
    if (static_cast<std::size_t>(b.rows()) != m)
        throw ShapeMismatch("right operand has " + std::to_string(b.rows()) + " rows, matrix has " +
                            std::to_string(m) + " columns");
    const auto &store = *view.store;
    const Eigen::Index p = b.cols();
    const std::size_t na = store.num_attributes();

    // per attribute value: Σ over the attribute's columns of f(value) · B[column]
    std::vector<DenseMatrix> contrib(na);
    std::vector<bool> used(na, false);
    for (std::size_t a = 0; a < na; ++a) contrib[a] = DenseMatrix::Zero(static_cast<Eigen::Index>(store.level(a).size()), p);
    for (std::size_t c = 0; c < m; ++c) {
        const std::size_t a = view.column_attr[c];
        used[a] = true;
        const auto &f = view.columns[c].values;
        for (std::size_t v = 0; v < f.size(); ++v)
            contrib[a].row(static_cast<Eigen::Index>(v)) += f[v] * b.row(static_cast<Eigen::Index>(c));
    }

    DenseMatrix out(static_cast<Eigen::Index>(store.num_rows()), p);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(p);
    std::vector<std::uint32_t> cur(na, 0);
    RowIterator it(store);
    RowDelta delta;
    auto fresh = [&]() {
        Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(p);
        for (std::size_t a = 0; a < na; ++a)
            if (used[a]) s += contrib[a].row(cur[a]);
        return s;
    };
    while (it.next(delta)) {
        const std::uint64_t r = it.row();
        if (r == 0) {
            for (auto [a, pos] : delta.changes) cur[a] = pos;
            acc = fresh();
        } else {
            for (auto [a, pos] : delta.changes) {
                if (used[a]) acc += contrib[a].row(pos) - contrib[a].row(cur[a]);
                cur[a] = pos;
            }
            if (refresh_every > 0 && r % refresh_every == 0) {
                Eigen::RowVectorXd f = fresh();
                if (stats) {
                    const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
                    stats->max_drift = std::max(stats->max_drift, (acc - f).cwiseAbs().maxCoeff() / scale);
                    ++stats->refreshes;
                }
                acc = f;
            }
        }
        out.row(static_cast<Eigen::Index>(r)) = acc;
    }
    return out;
}

DenseMatrix materialize(const FeatureMatrixView &view, std::uint64_t max_cells)
{
    const std::uint64_t n = view.num_rows();
    const std::size_t m = view.num_columns();
    if (m > 0 && n > max_cells / m)
        throw BudgetExceeded("materializing " + std::to_string(n) + "x" + std::to_string(m) + " exceeds the budget");
    DenseMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    RowIterator it(*view.store);
    RowDelta d;
    while (it.next(d)) {
        const auto &pos = it.current();
        const auto r = static_cast<Eigen::Index>(it.row());
        for (std::size_t c = 0; c < m; ++c)
            x(r, static_cast<Eigen::Index>(c)) = view.columns[c].values[pos[view.column_attr[c]]];
    }
    return x;
}

std::size_t ClusterLayout::cluster_of(std::uint64_t row) const
{
    auto it = std::upper_bound(begin.begin(), begin.end(), row);
    if (it == begin.begin() || it == begin.end()) throw UnknownGroup("row " + std::to_string(row) + " out of range");
    return static_cast<std::size_t>(it - begin.begin()) - 1;
}

ClusterLayout cluster_layout(const FactorStore &store)
{
    ClusterLayout l;
    const std::size_t m = store.num_attributes();
    if (m == 0) return l;
    l.intra_attribute = m - 1;
    for (std::size_t a = 0; a + 1 < m; ++a) l.inter_attributes.push_back(a);
    const auto &lv = store.level(m - 1);
    const std::size_t b = lv.block;
    const std::uint64_t period = store.suffix_rows(b);
    const std::uint64_t reps = store.num_rows() / period;
    std::vector<std::uint64_t> sizes;
    if (lv.level > 0) {
        const auto &parent = store.level(m - 2);
        for (std::uint32_t p = 0; p < parent.size(); ++p) sizes.push_back(parent.child_end[p] - parent.child_begin[p]);
    } else {
        sizes.push_back(lv.size());
    }
    l.begin.push_back(0);
    for (std::uint64_t r = 0; r < reps; ++r)
        for (auto s : sizes) l.begin.push_back(l.begin.back() + s);
    return l;
}

ClusterCursor::ClusterCursor(const FeatureMatrixView &view) : view_(view), layout_(cluster_layout(*view.store))
{
    z_ = view.z_columns();
    for (std::size_t k = 0; k < z_.size(); ++k) {
        if (view.column_attr[z_[k]] == layout_.intra_attribute)
            intra_.push_back(k);
        else
            inter_.push_back(k);
    }
    u_ = Vector::Zero(static_cast<Eigen::Index>(inter_.size()));
}

bool ClusterCursor::advance()
{
    if (done()) return false;
    const std::size_t i = next_;
    auto pos = view_.store->row_at(layout_.begin[i]);
    for (std::size_t j = 0; j < inter_.size(); ++j) {
        const std::size_t c = z_[inter_[j]];
        const std::size_t a = view_.column_attr[c];
        if (fresh_ || pos[a] != positions_[a]) u_[static_cast<Eigen::Index>(j)] = view_.columns[c].values[pos[a]];
    }
    const std::size_t L = layout_.intra_attribute;
    const auto &lv = view_.store->level(L);
    if (lv.level > 0) {
        parent_ = pos[L - 1];
        intra_begin_ = view_.store->level(L - 1).child_begin[parent_];
        intra_end_ = view_.store->level(L - 1).child_end[parent_];
    } else {
        parent_ = 0;
        intra_begin_ = 0;
        intra_end_ = static_cast<std::uint32_t>(lv.size());
    }
    positions_ = std::move(pos);
    fresh_ = false;
    current_ = i;
    ++next_;
    return true;
}

bool ClusterGramIter::next(std::size_t &cluster, DenseMatrix &out)
{
    if (!advance()) return false;
    cluster = current_;
    const auto mz = static_cast<Eigen::Index>(z_.size());
    out.resize(mz, mz);

    auto it = cache_.find(parent_);
    if (it == cache_.end()) {
        IntraSums s;
        const auto k = static_cast<Eigen::Index>(intra_.size());
        s.s1 = Vector::Zero(k);
        s.s2 = DenseMatrix::Zero(k, k);
        Vector g(k);
        for (std::uint32_t p = intra_begin_; p < intra_end_; ++p) {
            for (std::size_t j = 0; j < intra_.size(); ++j)
                g[static_cast<Eigen::Index>(j)] = view_.columns[z_[intra_[j]]].values[p];
            s.s1 += g;
            s.s2.noalias() += g * g.transpose();
        }
        it = cache_.emplace(parent_, std::move(s)).first;
    }
    const auto &sums = it->second;
    const double ni = static_cast<double>(layout_.rows(current_));
    for (std::size_t a = 0; a < inter_.size(); ++a) {
        const auto ia = static_cast<Eigen::Index>(inter_[a]);
        const double ua = u_[static_cast<Eigen::Index>(a)];
        for (std::size_t b = a; b < inter_.size(); ++b) {
            const auto ib = static_cast<Eigen::Index>(inter_[b]);
            out(ia, ib) = out(ib, ia) = ni * ua * u_[static_cast<Eigen::Index>(b)];
        }
        for (std::size_t j = 0; j < intra_.size(); ++j) {
            const auto ij = static_cast<Eigen::Index>(intra_[j]);
            out(ia, ij) = out(ij, ia) = ua * sums.s1[static_cast<Eigen::Index>(j)];
        }
    }
    for (std::size_t i = 0; i < intra_.size(); ++i)
        for (std::size_t j = 0; j < intra_.size(); ++j)
            out(static_cast<Eigen::Index>(intra_[i]), static_cast<Eigen::Index>(intra_[j])) =
                sums.s2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

    if (!view_.all_included()) {
        Vector z(mz);
        const std::uint64_t row0 = layout_.begin[current_];
        for (std::uint32_t p = intra_begin_; p < intra_end_; ++p) {
            if (view_.is_included(row0 + (p - intra_begin_))) continue;
            for (std::size_t a = 0; a < inter_.size(); ++a)
                z[static_cast<Eigen::Index>(inter_[a])] = u_[static_cast<Eigen::Index>(a)];
            for (std::size_t j = 0; j < intra_.size(); ++j)
                z[static_cast<Eigen::Index>(intra_[j])] = view_.columns[z_[intra_[j]]].values[p];
            out.noalias() -= z * z.transpose();
        }
    }
    return true;
}

bool ClusterLeftIter::next(const Eigen::Ref<const Vector> &d, std::size_t &cluster, Eigen::Ref<Vector> out)
{
    if (done()) return false;
    const std::size_t i = next_;
    if (static_cast<std::uint64_t>(d.size()) != layout_.rows(i) || out.size() != static_cast<Eigen::Index>(z_.size()))
        throw ShapeMismatch("cluster operand does not match cluster " + std::to_string(i));
    advance();
    cluster = current_;
    const std::uint64_t row0 = layout_.begin[current_];
    double total = 0;
    for (std::size_t j = 0; j < intra_.size(); ++j) out[static_cast<Eigen::Index>(intra_[j])] = 0;
    for (std::uint32_t p = intra_begin_; p < intra_end_; ++p) {
        const std::uint64_t k = p - intra_begin_;
        if (!view_.is_included(row0 + k)) continue;
        const double dk = d[static_cast<Eigen::Index>(k)];
        total += dk;
        for (std::size_t j = 0; j < intra_.size(); ++j)
            out[static_cast<Eigen::Index>(intra_[j])] += dk * view_.columns[z_[intra_[j]]].values[p];
    }
    for (std::size_t a = 0; a < inter_.size(); ++a)
        out[static_cast<Eigen::Index>(inter_[a])] = u_[static_cast<Eigen::Index>(a)] * total;
    return true;
}

bool ClusterRightIter::next(const Eigen::Ref<const Vector> &c, std::size_t &cluster, Eigen::Ref<Vector> out)
{
    if (done()) return false;
    const std::size_t i = next_;
    if (c.size() != static_cast<Eigen::Index>(z_.size()) || static_cast<std::uint64_t>(out.size()) != layout_.rows(i))
        throw ShapeMismatch("cluster operand does not match cluster " + std::to_string(i));
    advance();
    cluster = current_;
    double base = 0;
    for (std::size_t a = 0; a < inter_.size(); ++a)
        base += u_[static_cast<Eigen::Index>(a)] * c[static_cast<Eigen::Index>(inter_[a])];
    const std::uint64_t row0 = layout_.begin[current_];
    for (std::uint32_t p = intra_begin_; p < intra_end_; ++p) {
        const std::uint64_t k = p - intra_begin_;
        double v = 0;
        if (view_.is_included(row0 + k)) {
            v = base;
            for (std::size_t j = 0; j < intra_.size(); ++j)
                v += view_.columns[z_[intra_[j]]].values[p] * c[static_cast<Eigen::Index>(intra_[j])];
        }
        out[static_cast<Eigen::Index>(k)] = v;
    }
    return true;
}

} // namespace drillex
