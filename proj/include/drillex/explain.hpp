#pragma once

#include "drillex/aggregates.hpp"
#include "drillex/dataset.hpp"
#include "drillex/features.hpp"
#include "drillex/mlm.hpp"
#include "drillex/schema.hpp"
#include "drillex/stats.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace drillex {

enum class Direction { TooHigh, TooLow, Target };

const char *to_string(Direction d);
Direction direction_from_string(const std::string &s); ///< throws InvalidComplaint

/// The user's claim that `stat` of `tuple` in the current view is wrong.
struct Complaint
{
    GroupKey tuple;
    StatKind stat = StatKind::Count;
    Direction direction = Direction::TooHigh;
    double target = 0; ///< used when direction is Target
};

/// The statistic of one bundle; nullopt when undefined (empty group, or STD below 2 rows).
std::optional<double> stat_value(const StatBundle &b, StatKind stat);

/// |v − target|, v or −v.
double complaint_score(double value, const Complaint &c);

/// Complained statistic over `groups` with groups[index] replaced by `repaired`.  COUNT, SUM and
/// MEAN are updated incrementally from the totals; STD is recombined over every bundle.
double propagate_repair(const std::vector<StatBundle> &groups, std::size_t index, const StatBundle &repaired,
                        StatKind stat);

struct RepairCandidate
{
    std::string hierarchy;
    GroupKey group;
    StatBundle original;
    StatBundle repaired;
    double repaired_value = 0; ///< complained statistic after the repair
    double score = 0;
};

/// Scores one repair per group of one hierarchy and sorts ascending by (score, group key).
std::vector<RepairCandidate> rank_candidates(const std::string &hierarchy, const std::vector<GroupKey> &keys,
                                             const std::vector<StatBundle> &groups,
                                             const std::vector<StatBundle> &repairs, const Complaint &complaint);
/// Sorts by (score, hierarchy declaration order, group key).
void sort_candidates(std::vector<RepairCandidate> &c, const DatasetSchema &schema);

/// A custom feature from the named built-ins (identity, lag-k) on one attribute.
struct CustomFeatureSpec
{
    std::string function;
    std::string attribute;
};

struct ExplainConfig
{
    std::vector<AuxiliarySpec> auxiliary;
    std::vector<CustomFeatureSpec> custom;
    std::set<std::string> z_exclude; ///< feature names kept out of the random effects
    TrainConfig train;
    std::size_t k = 5;
    bool parallel = false; ///< evaluate candidate hierarchies on separate threads
};

/// Non-empty groups of the view with their statistics, ordered by key.
std::vector<std::pair<GroupKey, StatBundle>> view_groups(const Dataset &data, const ViewSpec &view);

/// Training columns for one model over `store`: intercept, a default feature per attribute (unless
/// it has one value or determines the rows), applicable auxiliary and custom features.
std::vector<FeatureMap> model_features(const FactorStore &store, const TrainingTarget &target,
                                       const ExplainConfig &config);

/// Full evaluation of one candidate drill-down hierarchy.
struct HierarchyEvaluation
{
    std::string hierarchy;
    std::vector<GroupKey> keys;                ///< drill-down groups of the complained tuple
    std::vector<StatBundle> groups;            ///< their raw statistics
    std::vector<StatBundle> repairs;           ///< their model-repaired statistics
    std::optional<std::vector<double>> count_prediction;
    std::optional<std::vector<double>> mean_prediction;
    std::vector<RepairCandidate> candidates;   ///< every group, sorted
    std::uint64_t training_rows = 0;           ///< parallel groups the models were trained on
};

/// Throws InvalidComplaint (tuple not in the view, statistic undefined) and AtLeafLevel.
HierarchyEvaluation evaluate_hierarchy(const Dataset &data, const ViewSpec &view, const Complaint &complaint,
                                       const std::string &hierarchy, const ExplainConfig &config,
                                       AggCache *cache = nullptr);

struct HierarchyRanking
{
    std::string hierarchy;
    std::vector<RepairCandidate> top; ///< at most K, ascending score
};

struct Recommendation
{
    RepairCandidate best;
    double current_value = 0;
    double current_score = 0;
    std::vector<HierarchyRanking> hierarchies; ///< declaration order
};

/// Ranks every hierarchy with remaining depth.  Throws NoCandidates, InvalidComplaint.
Recommendation rank(const Dataset &data, const ViewSpec &view, const Complaint &complaint,
                    const ExplainConfig &config, AggCache *cache = nullptr);

/// Complaint kind -> models to train.
std::vector<ModelTarget> models_for(StatKind stat);

} // namespace drillex
