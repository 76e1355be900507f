#pragma once

#include "drillex/explain.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace drillex {

enum class SynthError {
    Missing, ///< delete half of the group's rows
    Dup,     ///< duplicate half of the group's rows
    Up,      ///< shift every value by +5
    Down,    ///< shift every value by -5
};

/// Errors injected into `true_groups` groups (and `decoy` into one extra group, whose error does
/// not explain the complaint) plus the complaint submitted on the total.
struct SynthCondition
{
    std::string name;
    std::vector<SynthError> errors;
    std::size_t true_groups = 1;
    std::vector<SynthError> decoy;
    StatKind stat = StatKind::Count;
    Direction direction = Direction::TooLow;
};

/// missing, dup, up, down, missing+down, dup+up, and the ablations missing+dup, down+up, all.
/// Throws InvalidComplaint for other names.
SynthCondition synth_condition(const std::string &name);
std::vector<std::string> synth_condition_names();

struct SynthConfig
{
    std::size_t groups = 100;
    double row_mean = 100, row_sd = 20;
    double value_mean = 100, value_sd = 20;
    double shift = 5;
    double rho = 1.0;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    TrainConfig train;
};

/// Top-1 accuracy per method: "ours", "sensitivity", "support", "outlier".
struct SynthResult
{
    std::string condition;
    double rho = 0;
    std::size_t trials = 0;
    std::map<std::string, double> accuracy;
};

SynthResult synth_harness(const SynthCondition &condition, const SynthConfig &config);

/// Values of `pool` rearranged so that their ranks correlate with those of `x` with coefficient
/// about `rho` (Iman and Conover).
std::vector<double> correlated_with(const std::vector<double> &x, std::vector<double> pool, double rho,
                                    std::mt19937_64 &rng);

/// Spearman rank correlation.
double rank_correlation(const std::vector<double> &a, const std::vector<double> &b);

} // namespace drillex
