#include "drillex/value.hpp"

#include "drillex/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace drillex {

std::optional<double> parse_number(std::string_view s)
{
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

bool value_less(std::string_view a, std::string_view b)
{
    auto na = parse_number(a);
    auto nb = parse_number(b);
    if (na && nb) {
        if (*na != *nb) return *na < *nb;
        return a < b;
    }
    if (na.has_value() != nb.has_value()) return na.has_value();
    return a < b;
}

Dictionary::Dictionary(std::vector<std::string> values)
{
    std::sort(values.begin(), values.end(),
              [](const std::string &a, const std::string &b) { return value_less(a, b); });
    values.erase(std::unique(values.begin(), values.end()), values.end());
    values_ = std::move(values);
    index_.reserve(values_.size());
    for (ValueId i = 0; i < values_.size(); ++i) index_.emplace(values_[i], i);
}

std::optional<ValueId> Dictionary::find(std::string_view value) const
{
    auto it = index_.find(std::string(value));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

ValueId Dictionary::at(std::string_view value) const
{
    if (auto id = find(value)) return *id;
    throw UnknownGroup("unknown attribute value '" + std::string(value) + "'");
}

} // namespace drillex
