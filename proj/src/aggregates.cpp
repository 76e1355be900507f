#include "drillex/aggregates.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

namespace drillex {

std::uint64_t CountRelation::total() const
{
    std::uint64_t t = 0;
    for (const auto &[k, c] : tuples) t += c;
    return t;
}

CountRelation join(const CountRelation &left, const CountRelation &right, std::uint64_t *work)
{
    std::vector<std::size_t> shared_l, shared_r, extra_r;
    for (std::size_t j = 0; j < right.schema.size(); ++j) {
        auto it = std::find(left.schema.begin(), left.schema.end(), right.schema[j]);
        if (it == left.schema.end()) {
            extra_r.push_back(j);
        } else {
            shared_l.push_back(static_cast<std::size_t>(it - left.schema.begin()));
            shared_r.push_back(j);
        }
    }
    CountRelation out;
    out.schema = left.schema;
    for (std::size_t j : extra_r) out.schema.push_back(right.schema[j]);

    std::map<std::vector<ValueId>, std::vector<const std::pair<const std::vector<ValueId>, std::uint64_t> *>> index;
    for (const auto &t : right.tuples) {
        std::vector<ValueId> key;
        for (std::size_t j : shared_r) key.push_back(t.first[j]);
        index[key].push_back(&t);
    }
    std::uint64_t produced = 0;
    for (const auto &[lk, lc] : left.tuples) {
        std::vector<ValueId> key;
        for (std::size_t i : shared_l) key.push_back(lk[i]);
        auto it = index.find(key);
        if (it == index.end()) continue;
        for (const auto *rt : it->second) {
            std::vector<ValueId> k = lk;
            for (std::size_t j : extra_r) k.push_back(rt->first[j]);
            out.tuples[k] += lc * rt->second;
            ++produced;
        }
    }
    if (work) *work += produced;
    return out;
}

CountRelation marginalize(const CountRelation &rel, const std::string &attribute)
{
    auto it = std::find(rel.schema.begin(), rel.schema.end(), attribute);
    if (it == rel.schema.end()) throw UnknownAttribute("cannot marginalize '" + attribute + "'");
    const std::size_t drop = static_cast<std::size_t>(it - rel.schema.begin());
    CountRelation out;
    for (std::size_t i = 0; i < rel.schema.size(); ++i)
        if (i != drop) out.schema.push_back(rel.schema[i]);
    for (const auto &[k, c] : rel.tuples) {
        std::vector<ValueId> key;
        for (std::size_t i = 0; i < k.size(); ++i)
            if (i != drop) key.push_back(k[i]);
        out.tuples[key] += c;
    }
    return out;
}

CountRelation to_count_relation(const FactorRelation &rel)
{
    CountRelation out;
    if (rel.is_root()) {
        out.schema = {rel.attribute};
        for (ValueId v : rel.roots) out.tuples[{v}] = 1;
    } else {
        out.schema = {*rel.parent_attribute, rel.attribute};
        for (const auto &[p, cs] : rel.children)
            for (ValueId c : cs) out.tuples[{p, c}] = 1;
    }
    return out;
}

namespace {

CountRelation reorder(const CountRelation &rel, const std::vector<std::string> &schema)
{
    std::vector<std::size_t> idx;
    for (const auto &a : schema) {
        auto it = std::find(rel.schema.begin(), rel.schema.end(), a);
        if (it == rel.schema.end()) throw UnknownAttribute("missing attribute '" + a + "'");
        idx.push_back(static_cast<std::size_t>(it - rel.schema.begin()));
    }
    CountRelation out;
    out.schema = schema;
    for (const auto &[k, c] : rel.tuples) {
        std::vector<ValueId> key;
        for (std::size_t i : idx) key.push_back(k[i]);
        out.tuples[key] += c;
    }
    return out;
}

} // namespace

std::shared_ptr<const BlockAggs> compute_block(const FactorStore &store, std::size_t b)
{
    const auto &blk = store.blocks().at(b);
    auto out = std::make_shared<BlockAggs>();
    out->fingerprint = blk.fingerprint();
    const std::size_t L = blk.num_levels;
    std::vector<CountRelation> rel(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto &attr = store.attributes()[blk.first_attribute + l];
        out->attributes.push_back(attr);
        rel[l] = to_count_relation(store.relation(attr));
    }
    out->cnt.resize(L);

    // leaves: CNT' = 1 per value
    out->cnt[L - 1].schema = {out->attributes[L - 1]};
    for (ValueId v : store.level(blk.first_attribute + L - 1).values) out->cnt[L - 1].tuples[{v}] = 1;

    std::uint64_t work = 0;
    for (std::size_t s = L - 1; s-- > 0;) {
        const auto &as = out->attributes[s];
        const auto &an = out->attributes[s + 1];
        // COF'(s+1, s) = R_{s+1} ⊗ CNT'_{s+1}
        out->cof[{s + 1, s}] = reorder(join(rel[s + 1], out->cnt[s + 1], &work), {an, as});
        // CNT'_s = ⊕_{A_{s+1}} COF'(s+1, s)
        out->cnt[s] = marginalize(out->cof[{s + 1, s}], an);
        // COF'(d, s) = ⊕_{A_{s+1}} R_{s+1} ⊗ COF'(d, s+1)
        for (std::size_t d = s + 2; d < L; ++d) {
            auto j = join(rel[s + 1], out->cof.at({d, s + 1}), &work);
            out->cof[{d, s}] = reorder(marginalize(j, an), {out->attributes[d], as});
        }
    }
    out->total = out->cnt[0].total();
    out->join_work = work;

    out->cnt_pos.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto &lv = store.level(blk.first_attribute + l);
        auto &v = out->cnt_pos[l];
        v.resize(lv.size());
        for (std::uint32_t k = 0; k < lv.size(); ++k) v[k] = out->cnt[l].tuples.at({lv.values[k]});
    }
    for (const auto &[key, r] : out->cof) {
        const auto &ld = store.level(blk.first_attribute + key.first);
        const auto &ls = store.level(blk.first_attribute + key.second);
        auto &v = out->cof_pos[key];
        for (const auto &[k, c] : r.tuples) v.emplace_back(*ld.position(k[0]), *ls.position(k[1]), c);
        std::sort(v.begin(), v.end());
    }
    return out;
}

std::shared_ptr<const BlockAggs> AggCache::get(const std::string &key) const
{
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        ++misses_;
        return nullptr;
    }
    ++hits_;
    return it->second;
}

void AggCache::put(const std::string &key, std::shared_ptr<const BlockAggs> aggs)
{
    std::unique_lock lock(mutex_);
    entries_[key] = std::move(aggs);
}

void AggCache::clear()
{
    std::unique_lock lock(mutex_);
    entries_.clear();
}

std::size_t AggCache::size() const
{
    std::shared_lock lock(mutex_);
    return entries_.size();
}

DecompAggs assemble(const FactorStore &store, std::vector<std::shared_ptr<const BlockAggs>> blocks,
                    std::vector<std::uint64_t> work)
{
    DecompAggs a;
    a.fingerprint_ = store.fingerprint();
    a.rows_ = store.num_rows();
    const std::size_t nb = store.blocks().size();
    a.zoom_.assign(nb, 1);
    a.prefix_.assign(nb, 1);
    for (std::size_t b = 0; b < nb; ++b) {
        a.zoom_[b] = b + 1 < nb ? store.suffix_rows(b + 1) : 1;
        a.prefix_[b] = a.rows_ / store.suffix_rows(b);
        a.block_names_.push_back(store.blocks()[b].hierarchy);
    }
    for (std::size_t i = 0; i < store.num_attributes(); ++i) {
        a.attr_block_.push_back(store.level(i).block);
        a.attr_level_.push_back(store.level(i).level);
    }
    a.blocks_ = std::move(blocks);
    a.block_work_ = std::move(work);
    return a;
}

std::uint64_t DecompAggs::total(std::size_t attr) const
{
    const std::size_t b = attr_block_.at(attr);
    return blocks_[b]->total * zoom_[b];
}

std::uint64_t DecompAggs::count(std::size_t attr, std::uint32_t pos) const
{
    const std::size_t b = attr_block_.at(attr);
    return blocks_[b]->cnt_pos[attr_level_[attr]].at(pos) * zoom_[b];
}

std::map<ValueId, std::uint64_t> DecompAggs::cnt(std::size_t attr) const
{
    const std::size_t b = attr_block_.at(attr);
    std::map<ValueId, std::uint64_t> out;
    for (const auto &[k, c] : blocks_[b]->cnt[attr_level_[attr]].tuples) out[k[0]] = c * zoom_[b];
    return out;
}

bool DecompAggs::cof_is_factored(std::size_t deep, std::size_t shallow) const
{
    return attr_block_.at(deep) != attr_block_.at(shallow);
}

std::uint64_t DecompAggs::cof(std::size_t deep, ValueId v_deep, std::size_t shallow, ValueId v_shallow) const
{
    if (deep <= shallow) throw UnknownAttribute("COF needs the deeper attribute first");
    const std::size_t bd = attr_block_.at(deep), bs = attr_block_.at(shallow);
    const auto &D = *blocks_[bd];
    if (bd == bs) {
        const auto &r = D.cof.at({attr_level_[deep], attr_level_[shallow]});
        auto it = r.tuples.find({v_deep, v_shallow});
        return it == r.tuples.end() ? 0 : it->second * zoom_[bd];
    }
    const auto &S = *blocks_[bs];
    auto cd = D.cnt[attr_level_[deep]].tuples.find({v_deep});
    auto cs = S.cnt[attr_level_[shallow]].tuples.find({v_shallow});
    if (cd == D.cnt[attr_level_[deep]].tuples.end() || cs == S.cnt[attr_level_[shallow]].tuples.end()) return 0;
    // CNT_A * CNT_B / TOTAL_A; zoom of the shallower block already contains TOTAL'_A
    return cd->second * cs->second * (zoom_[bs] / D.total);
}

std::map<std::pair<ValueId, ValueId>, std::uint64_t> DecompAggs::cof_map(std::size_t deep, std::size_t shallow) const
{
    std::map<std::pair<ValueId, ValueId>, std::uint64_t> out;
    const std::size_t bd = attr_block_.at(deep), bs = attr_block_.at(shallow);
    if (deep <= shallow) throw UnknownAttribute("COF needs the deeper attribute first");
    if (bd == bs) {
        for (const auto &[k, c] : blocks_[bd]->cof.at({attr_level_[deep], attr_level_[shallow]}).tuples)
            out[{k[0], k[1]}] = c * zoom_[bd];
        return out;
    }
    for (const auto &[kd, cd] : blocks_[bd]->cnt[attr_level_[deep]].tuples)
        for (const auto &[ks, cs] : blocks_[bs]->cnt[attr_level_[shallow]].tuples)
            out[{kd[0], ks[0]}] = cd * cs * (zoom_[bs] / blocks_[bd]->total);
    return out;
}

std::uint64_t DecompAggs::replication(std::size_t attr) const
{
    return prefix_.at(attr_block_.at(attr));
}

std::uint64_t DecompAggs::join_work(const std::string &hierarchy) const
{
    std::uint64_t w = 0;
    for (std::size_t b = 0; b < block_names_.size(); ++b)
        if (block_names_[b] == hierarchy) w += block_work_[b];
    return w;
}

namespace {

std::shared_ptr<const BlockAggs> fetch_or_compute(const FactorStore &store, std::size_t b, AggCache *cache,
                                                  std::uint64_t &work)
{
    const std::string key = store.blocks()[b].fingerprint();
    if (cache) {
        if (auto hit = cache->get(key)) {
            work = 0;
            return hit;
        }
    }
    auto fresh = compute_block(store, b);
    work = fresh->join_work;
    if (cache) cache->put(key, fresh);
    return fresh;
}

} // namespace

DecompAggs compute_all(const FactorStore &store, AggCache *cache)
{
    std::vector<std::shared_ptr<const BlockAggs>> blocks;
    std::vector<std::uint64_t> work;
    for (std::size_t b = 0; b < store.blocks().size(); ++b) {
        std::uint64_t w = 0;
        blocks.push_back(fetch_or_compute(store, b, cache, w));
        work.push_back(w);
    }
    return assemble(store, std::move(blocks), std::move(work));
}

DecompAggs drilldown_update(const DecompAggs &aggs, const FactorStore &store, const std::string &drilled_hierarchy,
                            const std::string &new_attribute, AggCache *cache)
{
    const std::size_t attr = store.attribute_index(new_attribute);
    const std::size_t drilled = store.level(attr).block;
    const auto &dblk = store.blocks()[drilled];
    if (dblk.hierarchy != drilled_hierarchy || dblk.last_attribute() != attr)
        throw StaleAggs("'" + new_attribute + "' is not the deepest attribute of '" + drilled_hierarchy + "'");

    std::unordered_map<std::string, std::size_t> old;
    for (std::size_t b = 0; b < aggs.num_blocks(); ++b) old.emplace(aggs.block(b).fingerprint, b);

    std::size_t matched = 0;
    if (dblk.num_levels > 1) {
        const std::string prev =
            dblk.hierarchy + "@" + std::to_string(dblk.num_levels - 1) + "|" + dblk.filter_fingerprint;
        if (!old.count(prev)) throw StaleAggs("aggregates do not cover '" + drilled_hierarchy + "' before drilling");
        ++matched;
    }
    std::vector<std::shared_ptr<const BlockAggs>> blocks;
    std::vector<std::uint64_t> work;
    for (std::size_t b = 0; b < store.blocks().size(); ++b) {
        if (b == drilled) {
            std::uint64_t w = 0;
            blocks.push_back(fetch_or_compute(store, b, cache, w));
            work.push_back(w);
            continue;
        }
        auto it = old.find(store.blocks()[b].fingerprint());
        if (it == old.end())
            throw StaleAggs("aggregates are stale for hierarchy '" + store.blocks()[b].hierarchy + "'");
        blocks.push_back(aggs.blocks_[it->second]);
        work.push_back(0);
        ++matched;
    }
    if (matched != aggs.num_blocks()) throw StaleAggs("aggregates describe a different store");
    return assemble(store, std::move(blocks), std::move(work));
}

} // namespace drillex
