#include "drillex/factorizer.hpp"

#include "drillex/errors.hpp"

#include <algorithm>

namespace drillex {

std::optional<std::uint32_t> StoreLevel::position(ValueId id) const
{
    if (id >= value_index.size() || value_index[id] < 0) return std::nullopt;
    return static_cast<std::uint32_t>(value_index[id]);
}

std::string StoreBlock::fingerprint() const
{
    return hierarchy + "@" + std::to_string(num_levels) + "|" + filter_fingerprint;
}

FactorStore FactorStore::build(const Dataset &data, const AttributeOrder &order, const Filter &filter)
{
    const auto &schema = data.schema();
    std::vector<HierarchyInput> blocks;
    for (std::size_t h : order.hierarchies) {
        HierarchyInput in;
        in.name = schema.hierarchies[h].name;
        in.schema_index = h;
        for (std::size_t i = 0; i < order.attributes.size(); ++i)
            if (order.refs[i].hierarchy == h) {
                in.attributes.push_back(order.attributes[i]);
                in.dictionaries.push_back(&data.dictionary(order.refs[i]));
            }
        const std::size_t depth = in.attributes.size();
        // own predicates only: (level, code)
        std::vector<std::pair<std::size_t, ValueId>> preds;
        bool unsatisfiable = false;
        for (const auto &[attr, value] : filter) {
            auto ref = schema.find(attr);
            if (!ref || ref->hierarchy != h) continue;
            in.filter_fingerprint += attr + "=" + value + ";";
            auto code = data.dictionary(*ref).find(value);
            if (!code) {
                unsatisfiable = true;
                continue;
            }
            preds.emplace_back(ref->level, *code);
        }
        if (!unsatisfiable) {
            for (const auto &p : data.paths(h)) {
                bool keep = std::all_of(preds.begin(), preds.end(),
                                        [&](const auto &pr) { return p[pr.first] == pr.second; });
                if (keep) in.paths.emplace_back(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(depth));
            }
        }
        std::sort(in.paths.begin(), in.paths.end());
        in.paths.erase(std::unique(in.paths.begin(), in.paths.end()), in.paths.end());
        blocks.push_back(std::move(in));
    }
    return build(std::move(blocks));
}

FactorStore FactorStore::build(std::vector<HierarchyInput> inputs)
{
    FactorStore s;
    for (auto &in : inputs) {
        if (in.attributes.empty()) continue;
        if (in.paths.empty()) throw EmptyDomain("hierarchy '" + in.name + "' has no values under the filter");
        std::sort(in.paths.begin(), in.paths.end());
        in.paths.erase(std::unique(in.paths.begin(), in.paths.end()), in.paths.end());

        StoreBlock block;
        block.hierarchy = in.name;
        block.schema_index = in.schema_index;
        block.first_attribute = s.levels_.size();
        block.num_levels = in.attributes.size();
        block.leaves = in.paths.size();
        block.filter_fingerprint = in.filter_fingerprint;
        const std::size_t b = s.blocks_.size();

        for (std::size_t l = 0; l < in.attributes.size(); ++l) {
            StoreLevel lv;
            lv.attribute = in.attributes[l];
            lv.block = b;
            lv.level = l;
            lv.dictionary = in.dictionaries.at(l);
            FactorRelation rel;
            rel.attribute = in.attributes[l];
            if (l > 0) rel.parent_attribute = in.attributes[l - 1];

            // Paths are sorted, so distinct prefixes of length l+1 appear contiguously in DFS order.
            for (std::uint64_t i = 0; i < in.paths.size(); ++i) {
                const auto &p = in.paths[i];
                bool fresh = i == 0 ||
                             !std::equal(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(l + 1),
                                         in.paths[i - 1].begin());
                if (fresh) {
                    lv.values.push_back(p[l]);
                    lv.leaf_count.push_back(0);
                    lv.leaf_begin.push_back(i);
                    if (l == 0) {
                        rel.roots.push_back(p[0]);
                    } else {
                        rel.children[p[l - 1]].push_back(p[l]);
                    }
                }
                lv.leaf_count.back() += 1;
            }
            if (l > 0) {
                // parent positions: locate the parent of each value within the previous level
                auto &prev = s.levels_.back();
                std::uint32_t pp = 0;
                for (std::uint32_t k = 0; k < lv.size(); ++k) {
                    while (prev.leaf_begin[pp] + prev.leaf_count[pp] <= lv.leaf_begin[k]) ++pp;
                    lv.parent.push_back(pp);
                }
                prev.child_begin.assign(prev.size(), 0);
                prev.child_end.assign(prev.size(), 0);
                for (std::uint32_t k = 0; k < lv.size(); ++k) {
                    const std::uint32_t par = lv.parent[k];
                    if (k == 0 || lv.parent[k - 1] != par) prev.child_begin[par] = k;
                    prev.child_end[par] = k + 1;
                }
            }
            lv.is_end.assign(lv.size(), false);
            for (std::uint32_t k = 0; k < lv.size(); ++k) {
                bool last = (k + 1 == lv.size()) || (l > 0 && lv.parent[k + 1] != lv.parent[k]);
                lv.is_end[k] = last;
            }
            const std::size_t dict_size = lv.dictionary ? lv.dictionary->size() : 0;
            ValueId max_id = 0;
            for (ValueId v : lv.values) max_id = std::max(max_id, v);
            lv.value_index.assign(std::max<std::size_t>(dict_size, max_id + 1), -1);
            for (std::uint32_t k = 0; k < lv.size(); ++k) lv.value_index[lv.values[k]] = k;

            s.attributes_.push_back(lv.attribute);
            s.levels_.push_back(std::move(lv));
            s.relations_.push_back(std::move(rel));
        }
        s.blocks_.push_back(std::move(block));
    }

    s.suffix_rows_.assign(s.blocks_.size(), 1);
    std::uint64_t acc = 1;
    for (std::size_t b = s.blocks_.size(); b-- > 0;) {
        acc *= s.blocks_[b].leaves;
        s.suffix_rows_[b] = acc;
    }
    s.num_rows_ = s.blocks_.empty() ? 0 : acc;
    return s;
}

std::optional<std::size_t> FactorStore::find_attribute(const std::string &attribute) const
{
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i] == attribute) return i;
    return std::nullopt;
}

std::size_t FactorStore::attribute_index(const std::string &attribute) const
{
    if (auto i = find_attribute(attribute)) return *i;
    throw UnknownAttribute("attribute '" + attribute + "' is not in the store");
}

const FactorRelation &FactorStore::relation(const std::string &attribute) const
{
    return relations_[attribute_index(attribute)];
}

RowPositions FactorStore::row_at(std::uint64_t row) const
{
    if (row >= num_rows_) throw UnknownGroup("row " + std::to_string(row) + " out of range");
    RowPositions pos(levels_.size());
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        const auto &blk = blocks_[b];
        std::uint64_t leaf = row % blk.leaves;
        row /= blk.leaves;
        std::uint32_t p = static_cast<std::uint32_t>(leaf);
        for (std::size_t a = blk.last_attribute() + 1; a-- > blk.first_attribute;) {
            pos[a] = p;
            if (a > blk.first_attribute) p = levels_[a].parent[p];
        }
    }
    return pos;
}

std::uint64_t FactorStore::row_index(const std::vector<std::uint32_t> &leaf_per_block) const
{
    std::uint64_t r = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) r = r * blocks_[b].leaves + leaf_per_block.at(b);
    return r;
}

std::string FactorStore::fingerprint() const
{
    std::string f;
    for (const auto &b : blocks_) f += b.fingerprint() + "/";
    return f;
}

RowIterator::RowIterator(const FactorStore &store) : store_(&store) { }

bool RowIterator::next(RowDelta &delta)
{
    delta.changes.clear();
    const std::size_t m = store_->num_attributes();
    if (row_ >= store_->num_rows()) return false;
    if (row_ == 0) {
        cursor_.assign(m, 0);
        for (std::size_t a = 0; a < m; ++a) {
            const auto &lv = store_->level(a);
            if (lv.level > 0) cursor_[a] = store_->level(a - 1).child_begin[cursor_[a - 1]];
            delta.changes.emplace_back(a, cursor_[a]);
        }
        ++row_;
        return true;
    }
    if (!advance(m - 1, delta)) return false;
    ++row_;
    return true;
}

bool RowIterator::advance(std::size_t attr, RowDelta &delta)
{
    const auto &lv = store_->level(attr);
    const std::uint32_t end =
        lv.level == 0 ? static_cast<std::uint32_t>(lv.size()) : store_->level(attr - 1).child_end[cursor_[attr - 1]];
    if (cursor_[attr] + 1 < end) {
        ++cursor_[attr];
        delta.changes.emplace_back(attr, cursor_[attr]);
        return true;
    }
    // cursor_[attr] is in the EndSet: move the next less specific attribute, then restart.
    if (attr == 0) return false;
    if (!advance(attr - 1, delta)) return false;
    reset(attr, delta);
    return true;
}

void RowIterator::reset(std::size_t attr, RowDelta &delta)
{
    const auto &lv = store_->level(attr);
    const std::uint32_t begin = lv.level == 0 ? 0 : store_->level(attr - 1).child_begin[cursor_[attr - 1]];
    if (cursor_[attr] != begin) {
        cursor_[attr] = begin;
        delta.changes.emplace_back(attr, begin);
    }
}

std::optional<std::uint64_t> FactorStore::find_row(const GroupKey &key) const
{
    std::vector<std::uint32_t> leaves;
    for (const auto &b : blocks_) {
        std::optional<std::uint32_t> pos;
        for (std::size_t a = b.first_attribute; a <= b.last_attribute(); ++a) {
            const auto &lv = levels_[a];
            auto it = key.find(lv.attribute);
            if (it == key.end()) return std::nullopt;
            auto id = lv.dictionary->find(it->second);
            if (!id) return std::nullopt;
            auto p = lv.position(*id);
            if (!p || (pos && lv.parent[*p] != *pos)) return std::nullopt;
            pos = p;
        }
        leaves.push_back(*pos);
    }
    return row_index(leaves);
}

GroupKey FactorStore::group_key(std::uint64_t row) const
{
    auto pos = row_at(row);
    GroupKey k;
    for (std::size_t a = 0; a < levels_.size(); ++a) k[attributes_[a]] = levels_[a].name(pos[a]);
    return k;
}

} // namespace drillex
