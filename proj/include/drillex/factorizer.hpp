#pragma once

#include "drillex/dataset.hpp"
#include "drillex/schema.hpp"
#include "drillex/value.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace drillex {

/** Normalized relation of one attribute.  A hierarchy's first attribute is a root enumeration;
 * every other attribute is a sorted map from the parent (next less specific) value to its
 * sorted child values. */
struct FactorRelation
{
    std::string attribute;
    std::optional<std::string> parent_attribute;
    std::vector<ValueId> roots;
    std::map<ValueId, std::vector<ValueId>> children;

    bool is_root() const { return !parent_attribute.has_value(); }
};

/// Pre-filtered value paths of one hierarchy, truncated to the grouped depth.
struct HierarchyInput
{
    std::string name;
    std::size_t schema_index = 0;
    std::vector<std::string> attributes;
    std::vector<const Dictionary *> dictionaries;
    std::vector<std::vector<ValueId>> paths;
    std::string filter_fingerprint;
};

/// One attribute of the store, flattened in row (depth-first) order.
struct StoreLevel
{
    std::string attribute;
    std::size_t block = 0;
    std::size_t level = 0; ///< position inside its hierarchy
    const Dictionary *dictionary = nullptr;
    std::vector<ValueId> values;
    std::vector<std::uint32_t> parent;      ///< position in the previous level (non-root only)
    std::vector<std::uint32_t> child_begin; ///< range in the next level (non-leaf only)
    std::vector<std::uint32_t> child_end;
    std::vector<std::uint64_t> leaf_count; ///< leaves of the hierarchy under each value
    std::vector<std::uint64_t> leaf_begin; ///< index of the first such leaf
    std::vector<bool> is_end;              ///< EndSet membership: last child of its parent

    std::size_t size() const { return values.size(); }
    const std::string &name(std::uint32_t pos) const { return dictionary->value(values[pos]); }
    std::optional<std::uint32_t> position(ValueId id) const;

    std::vector<std::int64_t> value_index; ///< ValueId -> position, -1 when absent
};

/// One hierarchy's contiguous block of attributes in the store.
struct StoreBlock
{
    std::string hierarchy;
    std::size_t schema_index = 0;
    std::size_t first_attribute = 0;
    std::size_t num_levels = 0;
    std::uint64_t leaves = 0;
    std::string filter_fingerprint;

    std::size_t last_attribute() const { return first_attribute + num_levels - 1; }
    /// Identity of this block's content: hierarchy, depth and its own filter.
    std::string fingerprint() const;
};

/// Per-attribute positions of one logical row.
using RowPositions = std::vector<std::uint32_t>;

/** Factorised attribute matrix: one relation chain per hierarchy in attribute order.  Its
 * logical expansion is the cartesian product over hierarchies of each hierarchy's
 * root-to-leaf paths, in lexicographic row order.  Immutable after build. */
class FactorStore
{
  public:
    FactorStore() = default;

    /// Builds the store for the grouped prefix (`order`) of each hierarchy, keeping only the
    /// paths that satisfy the hierarchy's own predicates in `filter`.  Throws EmptyDomain.
    static FactorStore build(const Dataset &data, const AttributeOrder &order, const Filter &filter);
    static FactorStore build(std::vector<HierarchyInput> blocks);

    std::size_t num_attributes() const { return levels_.size(); }
    std::uint64_t num_rows() const { return num_rows_; }
    const std::vector<std::string> &attributes() const { return attributes_; }
    std::size_t attribute_index(const std::string &attribute) const; ///< throws UnknownAttribute
    std::optional<std::size_t> find_attribute(const std::string &attribute) const;

    const StoreLevel &level(std::size_t attr) const { return levels_.at(attr); }
    const std::vector<StoreBlock> &blocks() const { return blocks_; }
    const StoreBlock &block_of(std::size_t attr) const { return blocks_[levels_[attr].block]; }

    /// Normalized relation of `attribute`; throws UnknownAttribute.
    const FactorRelation &relation(const std::string &attribute) const;

    /// Number of logical rows spanned by one block and every block after it.
    std::uint64_t suffix_rows(std::size_t block) const { return suffix_rows_.at(block); }

    RowPositions row_at(std::uint64_t row) const;
    /// Row index of the row whose blocks end at the given leaves (one leaf position per block).
    std::uint64_t row_index(const std::vector<std::uint32_t> &leaf_per_block) const;
    /// Row of the group with these attribute values; extra keys are ignored.
    std::optional<std::uint64_t> find_row(const GroupKey &key) const;
    GroupKey group_key(std::uint64_t row) const;

    /// Stable identity of the whole store (every block fingerprint).
    std::string fingerprint() const;

  private:
    std::vector<std::string> attributes_;
    std::vector<StoreLevel> levels_;
    std::vector<StoreBlock> blocks_;
    std::vector<FactorRelation> relations_;
    std::vector<std::uint64_t> suffix_rows_;
    std::uint64_t num_rows_ = 0;
};

/// Attributes whose value changed from the previous row: (attribute index, new position).
struct RowDelta
{
    std::vector<std::pair<std::size_t, std::uint32_t>> changes;
};

/** Iterates the logical rows of a store in order, producing only the difference to the
 * previous row.  The deepest attribute advances each step; when it consumes an EndSet value
 * the next less specific attribute advances as well. */
class RowIterator
{
  public:
    explicit RowIterator(const FactorStore &store);

    /// First call yields the complete first row. Returns false once all rows were produced.
    bool next(RowDelta &delta);

    const RowPositions &current() const { return cursor_; }
    /// Index of the row produced by the last successful next().
    std::uint64_t row() const { return row_ - 1; }

  private:
    bool advance(std::size_t attr, RowDelta &delta);
    void reset(std::size_t attr, RowDelta &delta);

    const FactorStore *store_;
    RowPositions cursor_;
    std::uint64_t row_ = 0;
};

} // namespace drillex
