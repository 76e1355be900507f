#include "drillex/service.hpp"

#include "drillex/errors.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

namespace drillex {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string &path, const std::string &base)
{
    fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(base) / p).string();
}

template <class T> T field(const Json &j, const char *key)
{
    if (!j.contains(key)) throw ParseError(std::string("config is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception &e) {
        throw ParseError(std::string("config field '") + key + "': " + e.what());
    }
}

Json nullable(std::optional<double> v)
{
    return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

GroupKey key_from_json(const Json &j)
{
    if (!j.is_object()) throw InvalidComplaint("group must be an object of attribute: value");
    GroupKey k;
    for (const auto &[a, v] : j.items()) k[a] = v.is_string() ? v.get<std::string>() : v.dump();
    return k;
}

} // namespace

DatasetConfig parse_config(const Json &j, const std::string &base_dir)
{
    DatasetConfig c;
    c.name = j.value("name", "dataset");
    c.facts = resolve(field<std::string>(j, "facts"), base_dir);
    for (const auto &h : field<Json>(j, "hierarchies"))
        c.hierarchies.push_back({field<std::string>(h, "name"), field<std::vector<std::string>>(h, "attributes")});
    c.measures = field<std::vector<std::string>>(j, "measures");
    if (j.contains("auxiliary"))
        for (const auto &a : j.at("auxiliary"))
            c.auxiliary.push_back({field<std::string>(a, "name"), resolve(field<std::string>(a, "path"), base_dir),
                                   field<std::vector<std::string>>(a, "join"), field<std::string>(a, "measure")});
    if (j.contains("custom"))
        for (const auto &f : j.at("custom"))
            c.custom.push_back({field<std::string>(f, "function"), field<std::string>(f, "attribute")});
    if (j.contains("view")) c.view = j.at("view");
    return c;
}

DatasetConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error &e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
    return parse_config(j, fs::path(path).parent_path().string());
}

ViewSpec LoadedDataset::initial_view() const
{
    if (config.view) return view_from_json(*config.view, data.schema());
    return ViewSpec::root(data.schema(), data.schema().measures.front());
}

std::shared_ptr<const LoadedDataset> ingest(const DatasetConfig &config, const std::string &id)
{
    DatasetSchema schema;
    schema.hierarchies = config.hierarchies;
    schema.measures = config.measures;
    schema.check();
    if (schema.measures.empty()) throw SchemaError("dataset declares no measure");

    auto ds = std::make_shared<LoadedDataset>(LoadedDataset{
        id.empty() ? config.name : id, config, Dataset::from_table(read_csv_file(config.facts), schema), {}, {}});
    ds->cache = std::make_shared<AggCache>();
    for (const auto &a : config.auxiliary) {
        AuxiliarySpec spec{a.name, read_csv_file(a.path), a.join, a.measure};
        check_auxiliary(spec, ds->data.schema());
        ds->explain.auxiliary.push_back(std::move(spec));
    }
    for (const auto &c : config.custom) {
        ds->data.schema().locate(c.attribute);
        builtin_custom(c.function);
        ds->explain.custom.push_back(c);
    }
    ds->initial_view().check(ds->data.schema());
    return ds;
}

ViewSpec view_from_json(const Json &j, const DatasetSchema &schema)
{
    ViewSpec v = ViewSpec::root(schema, j.value("measure", schema.measures.front()));
    if (j.contains("depth"))
        for (const auto &[h, d] : j.at("depth").items()) v.depth[schema.hierarchy_index(h)] = d.get<std::size_t>();
    if (j.contains("filter"))
        for (const auto &[a, val] : j.at("filter").items()) {
            schema.locate(a);
            v.filter[a] = val.get<std::string>();
        }
    v.check(schema);
    return v;
}

Json view_to_json(const ViewSpec &v, const DatasetSchema &schema)
{
    Json depth = Json::object();
    for (std::size_t h = 0; h < schema.hierarchies.size(); ++h) depth[schema.hierarchies[h].name] = v.depth[h];
    return {{"depth", depth}, {"filter", v.filter}, {"measure", v.measure}, {"groupby", v.groupby(schema)}};
}

Complaint complaint_from_json(const Json &j)
{
    if (!j.is_object()) throw InvalidComplaint("complaint must be an object");
    Complaint c;
    try {
        c.tuple = key_from_json(j.value("tuple", Json::object()));
        c.stat = stat_kind_from_string(j.at("stat").get<std::string>());
        c.direction = direction_from_string(j.at("direction").get<std::string>());
        if (c.direction == Direction::Target) c.target = j.at("target").get<double>();
    } catch (const Json::exception &e) {
        throw InvalidComplaint(std::string("malformed complaint: ") + e.what());
    }
    return c;
}

Json complaint_to_json(const Complaint &c)
{
    Json j{{"tuple", c.tuple}, {"stat", to_string(c.stat)}, {"direction", to_string(c.direction)}};
    if (c.direction == Direction::Target) j["target"] = c.target;
    return j;
}

Json bundle_to_json(const StatBundle &b)
{
    return {{"count", b.count}, {"mean", nullable(b.mean_value())}, {"sum", b.sum()}, {"std", nullable(b.std())}};
}

Json candidate_to_json(const RepairCandidate &c)
{
    return {{"hierarchy", c.hierarchy},
            {"group", c.group},
            {"score", std::isfinite(c.score) ? Json(c.score) : Json(nullptr)},
            {"repaired_value", nullable(c.repaired_value)},
            {"original", bundle_to_json(c.original)},
            {"repaired", bundle_to_json(c.repaired)}};
}

Json recommendation_to_json(const Recommendation &r)
{
    Json hs = Json::array();
    for (const auto &h : r.hierarchies) {
        Json top = Json::array();
        for (const auto &c : h.top) top.push_back(candidate_to_json(c));
        hs.push_back({{"hierarchy", h.hierarchy}, {"top", top}});
    }
    return {{"current_value", r.current_value},
            {"current_score", r.current_score},
            {"best", candidate_to_json(r.best)},
            {"highlight", {{"hierarchy", r.best.hierarchy}, {"group", r.best.group}}},
            {"hierarchies", hs}};
}

Json view_aggregates_json(const Dataset &data, const ViewSpec &view)
{
    Json rows = Json::array();
    for (const auto &[k, b] : view_groups(data, view)) {
        Json row = bundle_to_json(b);
        row["group"] = k;
        rows.push_back(std::move(row));
    }
    Json j = view_to_json(view, data.schema());
    j["groups"] = std::move(rows);
    return j;
}

Session::Session(std::string id, std::shared_ptr<const LoadedDataset> dataset, ViewSpec view)
    : id_(std::move(id)), dataset_(std::move(dataset)), view_(std::move(view))
{
}

ViewSpec Session::view() const
{
    std::lock_guard lock(mutex_);
    return view_;
}

std::vector<DrillStep> Session::path() const
{
    std::lock_guard lock(mutex_);
    return path_;
}

std::vector<Complaint> Session::complaints() const
{
    std::lock_guard lock(mutex_);
    return complaints_;
}

std::optional<Recommendation> Session::last_recommendation() const
{
    std::lock_guard lock(mutex_);
    return last_;
}

Json Session::view_json() const
{
    std::lock_guard lock(mutex_);
    Json j = view_aggregates_json(dataset_->data, view_);
    Json path = Json::array();
    for (const auto &s : path_) path.push_back({{"hierarchy", s.hierarchy}, {"group", s.group}});
    j["path"] = path;
    j["session"] = id_;
    return j;
}

Recommendation Session::complain(const Complaint &c, std::optional<std::size_t> k)
{
    std::lock_guard lock(mutex_);
    ExplainConfig cfg = dataset_->explain;
    if (k) cfg.k = *k;
    auto rec = rank(dataset_->data, view_, c, cfg, dataset_->cache.get());
    complaints_.push_back(c);
    last_ = rec;
    return rec;
}

ViewSpec Session::drilldown(const std::string &hierarchy, const GroupKey &group)
{
    std::lock_guard lock(mutex_);
    const auto &schema = dataset_->data.schema();
    const std::size_t h = schema.hierarchy_index(hierarchy);
    if (!view_.has_remaining_depth(schema, h))
        throw AtLeafLevel("hierarchy '" + hierarchy + "' is already at its most specific attribute");
    bool found = false;
    for (const auto &[k, b] : view_groups(dataset_->data, view_))
        if (k == group) found = true;
    if (!found) throw UnknownGroup("group is not in the current view");
    view_ = drillex::drilldown(schema, view_, group, hierarchy);
    path_.push_back({hierarchy, group});
    last_.reset();
    return view_;
}

Table Session::records(const GroupKey &group) const
{
    std::lock_guard lock(mutex_);
    const auto &data = dataset_->data;
    const auto &raw = data.raw();
    std::vector<std::pair<std::size_t, std::string>> preds;
    for (const auto &[a, v] : view_.filter) preds.emplace_back(raw.column(a), v);
    for (const auto &[a, v] : group) {
        data.schema().locate(a);
        preds.emplace_back(raw.column(a), v);
    }
    Table out;
    out.header = raw.header;
    for (const auto &row : raw.rows) {
        bool keep = true;
        for (const auto &[c, v] : preds) keep = keep && row[c] == v;
        if (keep) out.rows.push_back(row);
    }
    if (out.rows.empty()) throw UnknownGroup("no records under the group");
    return out;
}

std::string SessionManager::add_dataset(std::shared_ptr<const LoadedDataset> dataset)
{
    std::lock_guard lock(mutex_);
    for (const auto &d : datasets_)
        if (d->id == dataset->id) throw SchemaError("dataset '" + dataset->id + "' is already registered");
    datasets_.push_back(dataset);
    return dataset->id;
}

std::vector<std::string> SessionManager::dataset_ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto &d : datasets_) out.push_back(d->id);
    return out;
}

std::shared_ptr<Session> SessionManager::create(const std::string &dataset_id)
{
    std::lock_guard lock(mutex_);
    std::shared_ptr<const LoadedDataset> ds;
    for (const auto &d : datasets_)
        if (dataset_id.empty() || d->id == dataset_id) {
            ds = d;
            break;
        }
    if (!ds) throw UnknownSession("unknown dataset '" + dataset_id + "'");
    const std::string id = "s" + std::to_string(next_++);
    auto s = std::make_shared<Session>(id, ds, ds->initial_view());
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string &session_id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw UnknownSession("unknown session '" + session_id + "'");
    return it->second;
}

int http_status(const std::exception &e)
{
    if (dynamic_cast<const Json::exception *>(&e)) return 400;
    const auto *err = dynamic_cast<const Error *>(&e);
    if (!err) return 500;
    const auto &k = err->kind();
    if (k == "UnknownSession" || k == "UnknownGroup") return 404;
    if (k == "InvalidComplaint" || k == "AtLeafLevel" || k == "NoCandidates" || k == "UnknownAttribute" ||
        k == "UnknownHierarchy" || k == "SchemaError" || k == "ParseError")
        return 400;
    return 500;
}

void install_routes(httplib::Server &server, SessionManager &sessions)
{
    using Req = httplib::Request;
    using Res = httplib::Response;
    auto send = [](Res &res, const Json &j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    };
    auto guarded = [send](auto fn) {
        return [fn, send](const Req &req, Res &res) {
            try {
                fn(req, res);
            } catch (const std::exception &e) {
                const auto *err = dynamic_cast<const Error *>(&e);
                send(res, {{"error", err ? err->kind() : "BadRequest"}, {"message", e.what()}}, http_status(e));
            }
        };
    };
    auto body = [](const Req &req) { return req.body.empty() ? Json::object() : Json::parse(req.body); };

    server.Post("/sessions", guarded([&sessions, send, body](const Req &req, Res &res) {
        const Json j = body(req);
        auto s = sessions.create(j.value("dataset", ""));
        send(res, {{"session", s->id()}, {"dataset", s->dataset().id}}, 201);
    }));
    server.Get(R"(/sessions/([^/]+)/view)", guarded([&sessions, send](const Req &req, Res &res) {
        send(res, sessions.get(req.matches[1])->view_json());
    }));
    server.Post(R"(/sessions/([^/]+)/complaint)", guarded([&sessions, send, body](const Req &req, Res &res) {
        auto s = sessions.get(req.matches[1]);
        const Json j = body(req);
        std::optional<std::size_t> k;
        if (j.contains("k")) k = j.at("k").get<std::size_t>();
        send(res, recommendation_to_json(s->complain(complaint_from_json(j), k)));
    }));
    server.Get(R"(/sessions/([^/]+)/recommendations)", guarded([&sessions, send](const Req &req, Res &res) {
        auto rec = sessions.get(req.matches[1])->last_recommendation();
        if (!rec) throw InvalidComplaint("no complaint has been submitted for the current view");
        send(res, recommendation_to_json(*rec));
    }));
    server.Post(R"(/sessions/([^/]+)/drilldown)", guarded([&sessions, send, body](const Req &req, Res &res) {
        auto s = sessions.get(req.matches[1]);
        const Json j = body(req);
        std::string hierarchy;
        GroupKey group;
        if (j.contains("hierarchy")) {
            hierarchy = j.at("hierarchy").get<std::string>();
            group = key_from_json(j.value("group", Json::object()));
        } else {
            auto rec = s->last_recommendation();
            if (!rec) throw InvalidComplaint("drilldown needs a hierarchy or a prior recommendation");
            hierarchy = rec->best.hierarchy;
            // the recommended group's parent tuple in the current view
            for (const auto &a : s->view().groupby(s->dataset().data.schema())) group[a] = rec->best.group.at(a);
        }
        s->drilldown(hierarchy, group);
        send(res, s->view_json());
    }));
    server.Get(R"(/sessions/([^/]+)/records)", guarded([&sessions, send](const Req &req, Res &res) {
        auto s = sessions.get(req.matches[1]);
        GroupKey group;
        for (const auto &[k, v] : req.params) group[k] = v;
        const Table t = s->records(group);
        send(res, {{"header", t.header}, {"rows", t.rows}});
    }));
}

int port_from_env(int fallback)
{
    if (const char *p = std::getenv("DRILLEX_PORT")) {
        try {
            return std::stoi(p);
        } catch (const std::exception &) {
            throw ParseError(std::string("DRILLEX_PORT is not a port: ") + p);
        }
    }
    return fallback;
}

} // namespace drillex
