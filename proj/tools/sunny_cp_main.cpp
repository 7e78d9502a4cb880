// sunny-cp: portfolio meta-solver front end.
//
//   solve     run the portfolio on one problem (MPD in, solver protocol out)
//   train     build a knowledge base from feature/run tables
//   score     Borda-count tournament over a results table
//   simulate  replay the selector against recorded runs
//
// The solve output is itself valid solver protocol, so one portfolio can sit
// inside another's configuration.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sunny/config.hpp"
#include "sunny/executor.hpp"
#include "sunny/features.hpp"
#include "sunny/knowledge_base.hpp"
#include "sunny/problem.hpp"
#include "sunny/protocol.hpp"
#include "sunny/scheduler.hpp"
#include "sunny/scoring.hpp"
#include "sunny/simulation.hpp"

namespace {

void print_answer(const sunny::ProblemDescriptor& problem, const sunny::SolverAnswer& answer) {
    using sunny::AnswerStatus;
    if (answer.status == AnswerStatus::Unsat) {
        std::cout << sunny::kUnsatMarker << '\n';
        return;
    }
    if (answer.status != AnswerStatus::Optimal && answer.status != AnswerStatus::Sat) return;
    for (const auto& var : problem.variables)
        std::cout << var.id << " = " << answer.assignment->at(var.id) << '\n';
    std::cout << sunny::kSolutionSeparator << '\n';
    if (answer.status == AnswerStatus::Optimal) std::cout << sunny::kCompleteMarker << '\n';
}

sunny::PresolveSpec parse_presolve_arg(const std::string& arg) {
    auto colon = arg.rfind(':');
    if (colon == std::string::npos)
        throw sunny::Error("--presolve expects <ids>:<seconds>, e.g. a,b:30");
    sunny::PresolveSpec spec;
    for (auto id : sunny::split(std::string_view(arg).substr(0, colon), ',')) {
        auto t = sunny::trim(id);
        if (t.empty()) throw sunny::Error("--presolve: empty solver id");
        spec.solvers.emplace_back(t);
    }
    auto seconds = sunny::try_parse_double(std::string_view(arg).substr(colon + 1));
    if (!seconds || *seconds <= 0)
        throw sunny::Error("--presolve: bad time '" + arg.substr(colon + 1) + "'");
    spec.seconds = *seconds;
    return spec;
}

int cmd_solve(const std::string& problem_path, const sunny::ExecConfig& cfg, bool no_selection,
              std::string log_path) {
    sunny::ProblemDescriptor problem = sunny::load_problem(problem_path);

    sunny::Schedule sigma;
    const std::int64_t t_ms = sunny::seconds_to_ms(cfg.timeout);
    if (no_selection) {
        sigma = sunny::uniform_schedule(cfg.solver_order, t_ms);
    } else {
        if (cfg.kb_dir.empty())
            throw sunny::Error(
                "solver selection needs a knowledge base (--kb or config kb=); "
                "use --no-selection to run without one");
        sunny::KnowledgeBase kb = sunny::load_kb(cfg.kb_dir);
        if (kb.schema != sunny::kBuiltinFeatureSchema)
            throw sunny::Error("knowledge base schema '" + kb.schema +
                               "' does not match the built-in feature extractor (" +
                               sunny::kBuiltinFeatureSchema + ")");
        const std::size_t k = std::min(cfg.knn, kb.size());
        auto nbrs = sunny::neighbors(kb, sunny::extract_features(problem), k);
        auto stats = sunny::solver_stats(kb, nbrs);
        std::string backup = cfg.solver_order.front();
        for (const auto& id : cfg.solver_order)
            if (stats.kb_solved_count(id) > stats.kb_solved_count(backup)) backup = id;
        sigma = sunny::sunny_schedule(stats, cfg.solver_order, backup, t_ms);
    }
    if (cfg.presolve)
        sigma = sunny::presolve_prefix(cfg.presolve->solvers,
                                       sunny::seconds_to_ms(cfg.presolve->seconds), sigma);
    auto cores = sunny::parallelize(sigma, cfg.cores, t_ms);

    sunny::RunResult result = sunny::run_portfolio(problem, cores, cfg.solvers, cfg);

    if (log_path.empty()) log_path = problem_path + ".events";
    sunny::write_file(log_path, result.log.render());
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';

    print_answer(problem, result.answer);
    return result.answer.status == sunny::AnswerStatus::Error ? 1 : 0;
}

int cmd_train(const std::string& features_path, const std::string& runs_path,
              const std::string& out_dir, double timeout, const std::string& schema) {
    auto instances = sunny::parse_features_csv(sunny::read_file(features_path), schema);
    auto runs = sunny::parse_runs_csv(sunny::read_file(runs_path));
    sunny::KnowledgeBase kb = sunny::make_kb(schema, timeout, std::move(instances), runs);
    sunny::save_kb(kb, out_dir);
    std::cout << "instances=" << kb.size() << " solvers=" << kb.solvers.size()
              << " runs=" << runs.size() << '\n';
    return 0;
}

int cmd_score(const std::string& results_path, double timeout, const std::string& csv_path) {
    auto results = sunny::parse_results_csv(sunny::read_file(results_path));
    sunny::ScoreTable table = sunny::borda_score(results, timeout);

    auto ranked = [&](auto key) {
        std::vector<std::pair<std::string, sunny::SolverScore>> rows(table.begin(), table.end());
        std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
            double ka = key(a.second), kb = key(b.second);
            return ka != kb ? ka > kb : a.first < b.first;
        });
        return rows;
    };

    std::cout << "complete ranking:\n";
    std::size_t place = 1;
    for (const auto& [id, score] : ranked([](const sunny::SolverScore& s) { return s.complete; }))
        std::cout << "  " << place++ << ". " << id << ' ' << sunny::format_double(score.complete)
                  << '\n';
    std::cout << "incomplete ranking:\n";
    place = 1;
    for (const auto& [id, score] : ranked([](const sunny::SolverScore& s) { return s.incomplete; }))
        std::cout << "  " << place++ << ". " << id << ' ' << sunny::format_double(score.incomplete)
                  << '\n';

    if (!csv_path.empty()) {
        std::string csv = "solver,complete,incomplete\n";
        for (const auto& [id, score] :
             ranked([](const sunny::SolverScore& s) { return s.complete; }))
            csv += id + ',' + sunny::format_double(score.complete) + ',' +
                   sunny::format_double(score.incomplete) + '\n';
        sunny::write_file(csv_path, csv);
    }
    return 0;
}

int cmd_simulate(const std::string& kb_dir, const std::string& test_dir, std::size_t k, double t,
                 int c, const std::string& out_path) {
    sunny::KnowledgeBase kb = sunny::load_kb(kb_dir);
    auto tests = sunny::load_test_set(test_dir, kb.schema);
    sunny::SelectorSummary summary = sunny::evaluate_selector(kb, tests, k, t, c);

    std::cout << "instances=" << tests.size() << " solved=" << summary.solved
              << " avg_time=" << sunny::format_double(summary.avg_time) << '\n';
    const std::string csv = sunny::serialize_results_csv(summary.results);
    if (out_path.empty())
        std::cout << csv;
    else
        sunny::write_file(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SUNNY-style portfolio meta-solver"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "run the portfolio on one problem");
    std::string problem_path, config_path, log_path, presolve_arg, policy_arg;
    double timeout = 0, restart_threshold = 0;
    int cores = 0;
    std::size_t knn = 0;
    std::string kb_dir;
    bool no_selection = false, virtual_clock = false;
    solve->add_option("problem", problem_path, "MPD problem file")->required();
    auto* opt_config = solve->add_option("--config", config_path, "portfolio config file")
                           ->envname("PORTFOLIO_CONFIG");
    auto* opt_t = solve->add_option("-T,--timeout", timeout, "time budget in seconds");
    auto* opt_c = solve->add_option("-c,--cores", cores, "number of cores");
    auto* opt_k = solve->add_option("-k,--knn", knn, "neighborhood size");
    auto* opt_tr =
        solve->add_option("--restart-threshold", restart_threshold, "restart threshold seconds");
    auto* opt_policy =
        solve->add_option("--restart-policy", policy_arg, "restart policy: all or any");
    solve->add_flag("--no-selection", no_selection, "skip selection; run every solver");
    auto* opt_presolve =
        solve->add_option("--presolve", presolve_arg, "static presolving: <ids>:<seconds>");
    solve->add_flag("--virtual-clock", virtual_clock, "deterministic simulated time");
    solve->add_option("--log", log_path, "event log path (default <problem>.events)");
    auto* opt_kb = solve->add_option("--kb", kb_dir, "knowledge base directory");

    // train
    auto* train = app.add_subcommand("train", "build a knowledge base from CSV tables");
    std::string tr_features, tr_runs, tr_out, tr_schema = sunny::kBuiltinFeatureSchema;
    double tr_timeout = 1200;
    train->add_option("features", tr_features, "features.csv")->required();
    train->add_option("runs", tr_runs, "runs.csv")->required();
    train->add_option("out", tr_out, "output KB directory")->required();
    train->add_option("-T,--timeout", tr_timeout, "training timeout in seconds");
    train->add_option("--schema", tr_schema, "feature schema id");

    // score
    auto* score = app.add_subcommand("score", "Borda tournament over a results table");
    std::string sc_results, sc_csv;
    double sc_timeout = 1200;
    score->add_option("results", sc_results, "results.csv")->required();
    score->add_option("-T,--timeout", sc_timeout, "instance time budget in seconds");
    score->add_option("--csv", sc_csv, "write the ranking as CSV here");

    // simulate
    auto* sim = app.add_subcommand("simulate", "replay the selector against recorded runs");
    std::string sim_kb, sim_test, sim_out;
    std::size_t sim_k = 70;
    double sim_t = 1200;
    int sim_c = 8;
    sim->add_option("--kb", sim_kb, "knowledge base directory")->required();
    sim->add_option("--test", sim_test, "test-set directory")->required();
    sim->add_option("-k,--knn", sim_k, "neighborhood size");
    sim->add_option("-T,--timeout", sim_t, "time budget in seconds");
    sim->add_option("-c,--cores", sim_c, "number of cores");
    sim->add_option("--out", sim_out, "write results CSV here (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (solve->parsed()) {
            sunny::ExecConfig cfg;
            if (config_path.empty())
                throw sunny::Error("no portfolio config: pass --config or set PORTFOLIO_CONFIG");
            cfg = sunny::load_portfolio_config(config_path, cfg);
            if (opt_t->count()) cfg.timeout = timeout;
            if (opt_c->count()) cfg.cores = cores;
            if (opt_k->count()) cfg.knn = knn;
            if (opt_tr->count()) cfg.restart_threshold = restart_threshold;
            if (opt_policy->count()) {
                auto policy = sunny::restart_policy_from_token(policy_arg);
                if (!policy) throw sunny::Error("--restart-policy must be all or any");
                cfg.restart_policy = *policy;
            }
            if (opt_presolve->count()) cfg.presolve = parse_presolve_arg(presolve_arg);
            if (opt_kb->count()) cfg.kb_dir = kb_dir;
            cfg.virtual_clock = virtual_clock;
            cfg.problem_path = problem_path;
            cfg.validate();
            (void)opt_config;
            return cmd_solve(problem_path, cfg, no_selection, log_path);
        }
        if (train->parsed()) return cmd_train(tr_features, tr_runs, tr_out, tr_timeout, tr_schema);
        if (score->parsed()) return cmd_score(sc_results, sc_timeout, sc_csv);
        if (sim->parsed()) return cmd_simulate(sim_kb, sim_test, sim_k, sim_t, sim_c, sim_out);
    } catch (const sunny::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
