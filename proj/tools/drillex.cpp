#include "drillex/bench.hpp"
#include "drillex/errors.hpp"
#include "drillex/service.hpp"
#include "drillex/synth.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <fstream>
#include <iostream>

using namespace drillex;

namespace {

Json read_json_arg(const std::string &arg)
{
    std::ifstream in(arg);
    try {
        return in ? Json::parse(in) : Json::parse(arg);
    } catch (const Json::parse_error &e) {
        throw ParseError("'" + arg + "' is neither a JSON file nor JSON: " + e.what());
    }
}

int run(const std::string &config, const std::string &complaint, std::size_t k, int iterations, bool parallel)
{
    auto ds = ingest(load_config(config));
    ExplainConfig cfg = ds->explain;
    cfg.k = k;
    cfg.train.max_iterations = iterations;
    cfg.parallel = parallel;
    const Json cj = read_json_arg(complaint);
    const ViewSpec view = cj.contains("view") ? view_from_json(cj.at("view"), ds->data.schema()) : ds->initial_view();
    const Complaint c = complaint_from_json(cj);
    auto rec = rank(ds->data, view, c, cfg, ds->cache.get());
    Json out = recommendation_to_json(rec);
    out["complaint"] = complaint_to_json(c);
    out["view"] = view_to_json(view, ds->data.schema());
    std::cout << out.dump(2) << "\n";
    return 0;
}

int bench(std::size_t max_d, std::size_t width, int repeats, std::uint64_t seed, const std::string &format)
{
    const auto rows = bench_range(max_d, width, repeats, seed);
    if (format == "json") {
        Json out = Json::array();
        for (const auto &r : rows)
            out.push_back({{"d", r.hierarchies}, {"w", r.width}, {"rows", r.rows}, {"columns", r.columns},
                           {"aggregates", r.aggregates}, {"gram", r.gram}, {"left_mul", r.left_mul},
                           {"right_mul", r.right_mul}, {"materialize", r.materialize}, {"dense_gram", r.dense_gram},
                           {"max_abs_diff", r.max_abs_diff}});
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    std::cout << "d,w,rows,columns,aggregates,gram,left_mul,right_mul,materialize,dense_gram,max_abs_diff\n";
    for (const auto &r : rows)
        std::cout << r.hierarchies << ',' << r.width << ',' << r.rows << ',' << r.columns << ',' << r.aggregates << ','
                  << r.gram << ',' << r.left_mul << ',' << r.right_mul << ',' << r.materialize << ','
                  << r.dense_gram << ',' << r.max_abs_diff << "\n";
    return 0;
}

int synth(const std::vector<std::string> &errors, double rho, std::size_t trials, std::size_t groups,
          std::uint64_t seed, int iterations)
{
    SynthConfig cfg;
    cfg.rho = rho;
    cfg.trials = trials;
    cfg.groups = groups;
    cfg.seed = seed;
    cfg.train.max_iterations = iterations;
    Json out = Json::array();
    for (const auto &e : errors.empty() ? synth_condition_names() : errors) {
        auto r = synth_harness(synth_condition(e), cfg);
        out.push_back({{"error", r.condition}, {"rho", r.rho}, {"trials", r.trials}, {"accuracy", r.accuracy}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int serve(const std::vector<std::string> &configs, const std::string &host, int port)
{
    SessionManager sessions;
    for (const auto &c : configs) sessions.add_dataset(ingest(load_config(c)));
    httplib::Server server;
    install_routes(server, sessions);
    std::cerr << "listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw ParseError("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"drill-down explanations for aggregate complaints"};
    app.require_subcommand(1);

    std::string config, complaint;
    std::size_t k = 5;
    int iterations = 20;
    bool parallel = false;
    auto *run_cmd = app.add_subcommand("run", "rank drill-down repairs for one complaint");
    run_cmd->add_option("--config", config, "dataset config JSON")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--complaint", complaint, "complaint JSON file or literal")->required();
    run_cmd->add_option("--k", k, "candidates per hierarchy")->check(CLI::PositiveNumber);
    run_cmd->add_option("--iterations", iterations, "EM iterations")->check(CLI::NonNegativeNumber);
    run_cmd->add_flag("--parallel", parallel, "evaluate hierarchies concurrently");

    std::size_t max_d = 5, width = 10;
    int repeats = 3;
    std::uint64_t seed = 1;
    std::string format = "csv";
    auto *bench_cmd = app.add_subcommand("bench", "factorised vs dense matrix operation timings");
    bench_cmd->add_option("--max-d", max_d, "largest number of hierarchies")->check(CLI::Range(1, 7));
    bench_cmd->add_option("--width", width, "values per attribute")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", seed);
    bench_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

    std::vector<std::string> errors;
    double rho = 1.0;
    std::size_t trials = 200, groups = 100;
    auto *synth_cmd = app.add_subcommand("synth", "synthetic error-injection accuracy");
    synth_cmd->add_option("--error", errors, "condition(s); all when omitted")
        ->check(CLI::IsMember(synth_condition_names()));
    synth_cmd->add_option("--rho", rho, "auxiliary rank correlation")->check(CLI::Range(-1.0, 1.0));
    synth_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
    synth_cmd->add_option("--groups", groups)->check(CLI::Range(5, 100000));
    synth_cmd->add_option("--seed", seed);
    synth_cmd->add_option("--iterations", iterations)->check(CLI::NonNegativeNumber);

    std::vector<std::string> configs;
    std::string host = "127.0.0.1";
    int port = 0;
    auto *serve_cmd = app.add_subcommand("serve", "HTTP JSON API (port from --port or DRILLEX_PORT)");
    serve_cmd->add_option("--config", configs, "dataset config JSON")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run_cmd) return run(config, complaint, k, iterations, parallel);
        if (*bench_cmd) return bench(max_d, width, repeats, seed, format);
        if (*synth_cmd) return synth(errors, rho, trials, groups, seed, iterations);
        if (*serve_cmd) return serve(configs, host, port ? port : port_from_env());
    } catch (const Error &e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
