#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drillex {

/// Dictionary code of a hierarchy attribute value. Codes of one attribute are dense and
/// ordered consistently with the value order, so comparing codes compares values.
using ValueId = std::uint32_t;

/// Parses `s` as a finite number if the whole string is numeric.
std::optional<double> parse_number(std::string_view s);

/// Value order: numeric values (numerically) before non-numeric values (lexicographically).
bool value_less(std::string_view a, std::string_view b);

/** Sorted dictionary of the distinct values of one attribute.  Built once from all raw values
 * and immutable afterwards. */
class Dictionary
{
  public:
    Dictionary() = default;
    explicit Dictionary(std::vector<std::string> values);

    std::size_t size() const { return values_.size(); }
    const std::string &value(ValueId id) const { return values_.at(id); }
    const std::vector<std::string> &values() const { return values_; }

    std::optional<ValueId> find(std::string_view value) const;
    ValueId at(std::string_view value) const;

  private:
    std::vector<std::string> values_;
    std::unordered_map<std::string, ValueId> index_;
};

} // namespace drillex
