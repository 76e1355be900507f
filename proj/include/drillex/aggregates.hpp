#pragma once

#include "drillex/factorizer.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace drillex {

/// Relation with a count per tuple, the operand type of the join (⊗) and marginalization (⊕)
/// operators.
struct CountRelation
{
    std::vector<std::string> schema;
    std::map<std::vector<ValueId>, std::uint64_t> tuples;

    std::uint64_t total() const;
};

/// Natural join; counts multiply.  `work`, when given, is increased by the number of output tuples.
CountRelation join(const CountRelation &left, const CountRelation &right, std::uint64_t *work = nullptr);
/// Sums counts over `attribute`, removing it from the schema.
CountRelation marginalize(const CountRelation &rel, const std::string &attribute);
/// R[A] for a root enumeration, R[parent, A] otherwise; every tuple has count 1.
CountRelation to_count_relation(const FactorRelation &rel);

/** Decomposed count aggregates of one hierarchy block, computed over the hierarchy's own
 * relations only (TOTAL', CNT', COF').  Independent of every other hierarchy, so they are
 * cached by block fingerprint. */
struct BlockAggs
{
    std::string fingerprint;
    std::vector<std::string> attributes;
    std::vector<CountRelation> cnt;                                  ///< per level, schema [A]
    std::map<std::pair<std::size_t, std::size_t>, CountRelation> cof; ///< (deeper, shallower) levels
    std::uint64_t total = 0;
    std::uint64_t join_work = 0; ///< tuples produced by joins while computing this block

    /// Position-indexed copies for the matrix kernels (positions follow StoreLevel order).
    std::vector<std::vector<std::uint64_t>> cnt_pos;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint64_t>>>
        cof_pos;
};

/// Computes one block's aggregates with the multi-query rewrite rules.
std::shared_ptr<const BlockAggs> compute_block(const FactorStore &store, std::size_t block);

/** Thread-safe cache of per-hierarchy aggregates keyed by (hierarchy, depth, own filter). */
class AggCache
{
  public:
    std::shared_ptr<const BlockAggs> get(const std::string &key) const;
    void put(const std::string &key, std::shared_ptr<const BlockAggs> aggs);
    void clear();
    std::size_t size() const;
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

  private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<const BlockAggs>> entries_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

/** TOTAL/CNT/COF for every attribute of a store.  Each block keeps its own aggregates and a
 * zoom factor (rows spanned by the blocks after it); full counts are block counts times zoom.
 * Cross-hierarchy COF is never materialized. */
class DecompAggs
{
  public:
    const std::string &fingerprint() const { return fingerprint_; }
    std::uint64_t rows() const { return rows_; }
    std::size_t num_attributes() const { return attr_block_.size(); }

    std::uint64_t total(std::size_t attr) const;
    std::uint64_t count(std::size_t attr, std::uint32_t pos) const;
    std::map<ValueId, std::uint64_t> cnt(std::size_t attr) const;
    /// COF_{deep, shallow}[v_deep, v_shallow] with `deep` after `shallow` in attribute order.
    std::uint64_t cof(std::size_t deep, ValueId v_deep, std::size_t shallow, ValueId v_shallow) const;
    std::map<std::pair<ValueId, ValueId>, std::uint64_t> cof_map(std::size_t deep, std::size_t shallow) const;
    bool cof_is_factored(std::size_t deep, std::size_t shallow) const;

    /// n / TOTAL_A: how often the suffix matrix starting at `attr` repeats.
    std::uint64_t replication(std::size_t attr) const;
    std::uint64_t zoom(std::size_t block) const { return zoom_.at(block); }

    const BlockAggs &block(std::size_t b) const { return *blocks_.at(b); }
    std::size_t block_of(std::size_t attr) const { return attr_block_.at(attr); }
    std::size_t level_of(std::size_t attr) const { return attr_level_.at(attr); }
    std::size_t num_blocks() const { return blocks_.size(); }

    /// Join work spent on blocks of this hierarchy while building this object (0 when reused).
    std::uint64_t join_work(const std::string &hierarchy) const;

  private:
    friend DecompAggs assemble(const FactorStore &, std::vector<std::shared_ptr<const BlockAggs>>,
                               std::vector<std::uint64_t>);
    friend DecompAggs drilldown_update(const DecompAggs &, const FactorStore &, const std::string &,
                                       const std::string &, AggCache *);

    std::string fingerprint_;
    std::uint64_t rows_ = 0;
    std::vector<std::shared_ptr<const BlockAggs>> blocks_;
    std::vector<std::string> block_names_;
    std::vector<std::uint64_t> block_work_;
    std::vector<std::uint64_t> zoom_;
    std::vector<std::uint64_t> prefix_; ///< rows spanned by the blocks before each block
    std::vector<std::size_t> attr_block_;
    std::vector<std::size_t> attr_level_;
};

DecompAggs assemble(const FactorStore &store, std::vector<std::shared_ptr<const BlockAggs>> blocks,
                    std::vector<std::uint64_t> work);

/// Computes every block's aggregates, consulting and filling `cache` when given.
DecompAggs compute_all(const FactorStore &store, AggCache *cache = nullptr);

/** Updates `aggs` (valid for the store before drilling) to `store`, which differs by one extra
 * attribute `new_attribute` of `drilled_hierarchy` (and possibly block order).  Only the drilled
 * block is recomputed (or fetched from `cache`); every other block is reused and rescaled.
 * Throws StaleAggs if `aggs` does not describe the pre-drill-down store. */
DecompAggs drilldown_update(const DecompAggs &aggs, const FactorStore &store, const std::string &drilled_hierarchy,
                            const std::string &new_attribute, AggCache *cache = nullptr);

} // namespace drillex
