#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace drillex {

/// Seconds per operation on the cross product of `hierarchies` one-attribute hierarchies with
/// `width` values each (width^hierarchies parallel groups, one random feature per attribute).
struct BenchRow
{
    std::size_t hierarchies = 0;
    std::size_t width = 0;
    std::uint64_t rows = 0;
    std::size_t columns = 0;
    double aggregates = 0;   ///< compute_all
    double gram = 0;         ///< factorised XᵀX
    double left_mul = 0;     ///< factorised yᵀX
    double right_mul = 0;    ///< factorised Xβ
    double materialize = 0;  ///< dense X
    double dense_gram = 0;   ///< XᵀX on the dense X
    double max_abs_diff = 0; ///< between the factorised and dense gram
};

/// Minimum over `repeats` runs of each operation.
BenchRow bench_point(std::size_t hierarchies, std::size_t width, int repeats = 3, std::uint64_t seed = 1);

std::vector<BenchRow> bench_range(std::size_t max_hierarchies, std::size_t width, int repeats = 3,
                                  std::uint64_t seed = 1);

} // namespace drillex
