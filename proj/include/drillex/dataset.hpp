#pragma once

#include "drillex/schema.hpp"
#include "drillex/table.hpp"
#include "drillex/value.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace drillex {

/** Dictionary-encoded fact table.  Hierarchy attributes are stored as codes, measures as doubles.
 * Immutable after construction; safe to share across threads. */
class Dataset
{
  public:
    /// Encodes `table`.  Throws MissingColumn, SchemaError (empty hierarchy value),
    /// FDViolationError and ParseError (non-numeric measure).
    static Dataset from_table(const Table &table, DatasetSchema schema);

    const DatasetSchema &schema() const { return schema_; }
    std::size_t num_rows() const { return num_rows_; }

    const Dictionary &dictionary(const AttributeRef &ref) const { return dicts_.at(ref.hierarchy).at(ref.level); }
    const Dictionary &dictionary(const std::string &attribute) const { return dictionary(schema_.locate(attribute)); }

    ValueId code(std::size_t row, const AttributeRef &ref) const { return codes_[ref.hierarchy][ref.level][row]; }
    const std::vector<ValueId> &column(const AttributeRef &ref) const { return codes_.at(ref.hierarchy).at(ref.level); }

    const std::vector<double> &measure(const std::string &name) const;

    /// Distinct full-depth value paths of hierarchy `h`, sorted.
    const std::vector<std::vector<ValueId>> &paths(std::size_t h) const { return paths_.at(h); }

    /// Raw table the dataset was encoded from (row order preserved).
    const Table &raw() const { return raw_; }

  private:
    DatasetSchema schema_;
    std::size_t num_rows_ = 0;
    std::vector<std::vector<Dictionary>> dicts_;
    std::vector<std::vector<std::vector<ValueId>>> codes_;
    std::vector<std::vector<double>> measures_;
    std::vector<std::vector<std::vector<ValueId>>> paths_;
    Table raw_;
};

} // namespace drillex
