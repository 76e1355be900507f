#include "drillex/stats.hpp"

#include "drillex/errors.hpp"

#include <cmath>

namespace drillex {

StatBundle StatBundle::from_values(const std::vector<double> &values)
{
    StatBundle b;
    for (double x : values) b.add(x);
    return b;
}

StatBundle StatBundle::from_count_mean_std(double count, double mean, double std)
{
    StatBundle b;
    b.count = count;
    b.mean = count > 0 ? mean : 0;
    b.m2 = count > 1 ? (count - 1) * std * std : 0;
    b.total = b.count * b.mean;
    return b;
}

void StatBundle::add(double x)
{
    count += 1;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
    total += x;
}

void StatBundle::reset(double new_count, double new_mean)
{
    count = new_count;
    mean = new_count > 0 ? new_mean : 0;
    total = count * mean;
}

std::optional<double> StatBundle::std() const
{
    if (count < 2) return std::nullopt;
    return std::sqrt(std::max(0.0, m2 / (count - 1)));
}

std::optional<double> StatBundle::mean_value() const
{
    if (count <= 0) return std::nullopt;
    return mean;
}

StatBundle combine(const std::vector<StatBundle> &bundles)
{
    StatBundle out;
    for (const auto &b : bundles) {
        out.count += b.count;
        out.total += b.total;
    }
    if (out.count <= 0) throw AllEmpty("all combined groups are empty");
    out.mean = out.total / out.count;
    // pooled: Σ (c_j - 1) s_j² + Σ c_j (G_mean - mean_j)²
    for (const auto &b : bundles) {
        if (b.count <= 0) continue;
        const double d = out.mean - b.mean;
        out.m2 += b.m2 + b.count * d * d;
    }
    return out;
}

} // namespace drillex
