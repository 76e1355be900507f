#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace drillex {

/// Distributive statistics of one group: count, mean and sum of squared deviations.
struct StatBundle
{
    double count = 0;
    double mean = 0;
    double m2 = 0; ///< Σ (x - mean)²; (count - 1) · std²
    double total = 0; ///< Σ x, kept exactly for integral data

    static StatBundle from_values(const std::vector<double> &values);
    static StatBundle from_count_mean_std(double count, double mean, double std);

    void add(double x); ///< Welford update

    bool empty() const { return count <= 0; }
    double sum() const { return total; }
    /// Replaces count and mean, keeping m2.
    void reset(double new_count, double new_mean);
    /// Sample standard deviation; nullopt when count < 2.
    std::optional<double> std() const;
    std::optional<double> mean_value() const;
};

/// G_count, G_mean and G_std over the bundles.  Throws AllEmpty when the total count is 0.
StatBundle combine(const std::vector<StatBundle> &bundles);

} // namespace drillex
