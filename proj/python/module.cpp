#include "drillex/bench.hpp"
#include "drillex/errors.hpp"
#include "drillex/service.hpp"
#include "drillex/synth.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace drillex;

namespace {

/// One dataset with a single session, speaking JSON strings.
class Engine
{
  public:
    explicit Engine(const std::string &config)
    {
        sessions_.add_dataset(ingest(load_config(config)));
        session_ = sessions_.create();
    }

    std::string view() const { return session_->view_json().dump(); }

    std::string complain(const std::string &complaint, std::size_t k)
    {
        return recommendation_to_json(session_->complain(complaint_from_json(Json::parse(complaint)), k)).dump();
    }

    std::string drilldown(const std::string &hierarchy, const std::map<std::string, std::string> &group)
    {
        session_->drilldown(hierarchy, group);
        return session_->view_json().dump();
    }

    std::vector<std::map<std::string, std::string>> records(const std::map<std::string, std::string> &group) const
    {
        const Table t = session_->records(group);
        std::vector<std::map<std::string, std::string>> out;
        for (const auto &row : t.rows) {
            std::map<std::string, std::string> r;
            for (std::size_t c = 0; c < t.header.size(); ++c) r[t.header[c]] = row[c];
            out.push_back(std::move(r));
        }
        return out;
    }

  private:
    SessionManager sessions_;
    std::shared_ptr<Session> session_;
};

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "drill-down explanation engine";

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error &e) {
            py::set_error(error, (e.kind() + ": " + e.what()).c_str());
        }
    });

    py::class_<Engine>(m, "Engine")
        .def(py::init<const std::string &>(), py::arg("config"))
        .def("view", &Engine::view)
        .def("complain", &Engine::complain, py::arg("complaint"), py::arg("k") = 5)
        .def("drilldown", &Engine::drilldown, py::arg("hierarchy"), py::arg("group"))
        .def("records", &Engine::records, py::arg("group"));

    m.def(
        "synth",
        [](const std::string &error, double rho, std::size_t trials, std::uint64_t seed) {
            SynthConfig cfg;
            cfg.rho = rho;
            cfg.trials = trials;
            cfg.seed = seed;
            return synth_harness(synth_condition(error), cfg).accuracy;
        },
        py::arg("error"), py::arg("rho") = 1.0, py::arg("trials") = 200, py::arg("seed") = 1);

    m.def(
        "bench",
        [](std::size_t max_d, std::size_t width, int repeats) {
            std::vector<std::map<std::string, double>> out;
            for (const auto &r : bench_range(max_d, width, repeats))
                out.push_back({{"d", double(r.hierarchies)}, {"rows", double(r.rows)}, {"gram", r.gram},
                               {"left_mul", r.left_mul}, {"right_mul", r.right_mul},
                               {"materialize", r.materialize}, {"dense_gram", r.dense_gram}});
            return out;
        },
        py::arg("max_d") = 5, py::arg("width") = 10, py::arg("repeats") = 1);

    m.def("synth_conditions", &synth_condition_names);
}
