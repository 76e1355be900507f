#pragma once

#include "drillex/explain.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace httplib { class Server; }

namespace drillex {

using Json = nlohmann::json;

struct AuxiliaryConfig
{
    std::string name;
    std::string path;
    std::vector<std::string> join;
    std::string measure;
};

struct DatasetConfig
{
    std::string name;
    std::string facts; ///< CSV path
    std::vector<Hierarchy> hierarchies;
    std::vector<std::string> measures;
    std::vector<AuxiliaryConfig> auxiliary;
    std::vector<CustomFeatureSpec> custom;
    std::optional<Json> view; ///< initial view: {depth: {H: n}, filter: {...}, measure}
};

/// Relative paths are resolved against `base_dir`.  Throws ParseError.
DatasetConfig parse_config(const Json &j, const std::string &base_dir = ".");
DatasetConfig load_config(const std::string &path);

/// A dataset loaded in memory with its auxiliary tables.  Immutable and shared by sessions.
struct LoadedDataset
{
    std::string id;
    DatasetConfig config;
    Dataset data;
    ExplainConfig explain;
    std::shared_ptr<AggCache> cache = std::make_shared<AggCache>();

    /// The configured initial view, or the root view over the first measure.
    ViewSpec initial_view() const;
};

/// Reads and validates the facts and auxiliary CSVs.  Throws ParseError, FDViolationError,
/// MissingColumn, SchemaError.
std::shared_ptr<const LoadedDataset> ingest(const DatasetConfig &config, const std::string &id = "");

ViewSpec view_from_json(const Json &j, const DatasetSchema &schema);
Json view_to_json(const ViewSpec &v, const DatasetSchema &schema);
Complaint complaint_from_json(const Json &j); ///< throws InvalidComplaint
Json complaint_to_json(const Complaint &c);
Json bundle_to_json(const StatBundle &b);
Json candidate_to_json(const RepairCandidate &c);
Json recommendation_to_json(const Recommendation &r);
/// Group-by, filter and one row per non-empty group with COUNT, MEAN, SUM and STD.
Json view_aggregates_json(const Dataset &data, const ViewSpec &view);

struct DrillStep
{
    std::string hierarchy;
    GroupKey group;
};

/// One analyst's walk through a dataset.  Every method serializes on the session mutex.
class Session
{
  public:
    Session(std::string id, std::shared_ptr<const LoadedDataset> dataset, ViewSpec view);

    const std::string &id() const { return id_; }
    const LoadedDataset &dataset() const { return *dataset_; }

    ViewSpec view() const;
    std::vector<DrillStep> path() const;
    std::vector<Complaint> complaints() const;
    std::optional<Recommendation> last_recommendation() const;

    Json view_json() const;
    /// Ranks the complaint against the current view and keeps the result.
    Recommendation complain(const Complaint &c, std::optional<std::size_t> k = std::nullopt);
    /// Drills `group` of the current view into `hierarchy`.  Throws AtLeafLevel, UnknownGroup.
    ViewSpec drilldown(const std::string &hierarchy, const GroupKey &group);
    /// Fact rows under `group` of the current view.  Throws UnknownGroup, UnknownAttribute.
    Table records(const GroupKey &group) const;

  private:
    std::string id_;
    std::shared_ptr<const LoadedDataset> dataset_;
    mutable std::mutex mutex_;
    ViewSpec view_;
    std::vector<DrillStep> path_;
    std::vector<Complaint> complaints_;
    std::optional<Recommendation> last_;
};

class SessionManager
{
  public:
    /// Returns the dataset id.
    std::string add_dataset(std::shared_ptr<const LoadedDataset> dataset);
    std::vector<std::string> dataset_ids() const;

    /// Starts at the dataset's initial view; an empty id picks the first dataset.
    std::shared_ptr<Session> create(const std::string &dataset_id = "");
    std::shared_ptr<Session> get(const std::string &session_id) const; ///< throws UnknownSession

  private:
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<const LoadedDataset>> datasets_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_ = 1;
};

/// HTTP status for an engine error.
int http_status(const std::exception &e);

/// Registers the JSON API on `server`:
///   POST /sessions, GET /sessions/{id}/view, POST /sessions/{id}/complaint,
///   GET /sessions/{id}/recommendations, POST /sessions/{id}/drilldown, GET /sessions/{id}/records
void install_routes(httplib::Server &server, SessionManager &sessions);

/// Port from DRILLEX_PORT, else `fallback`.
int port_from_env(int fallback = 8080);

} // namespace drillex
