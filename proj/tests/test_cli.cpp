// End-to-end tests driving the sunny-cp binary through a shell, covering all
// four subcommands, exit codes, and the determinism contract of virtual-clock
// runs.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "sunny/executor.hpp"
#include "sunny/features.hpp"
#include "sunny/io.hpp"
#include "sunny/knowledge_base.hpp"
#include "sunny/problem.hpp"
#include "sunny/process.hpp"
#include "sunny/protocol.hpp"
#include "sunny/scoring.hpp"

using namespace sunny;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
    TempDir scratch;
    const std::string err_path = (std::filesystem::path(scratch.path()) / "err").string();
    std::string cmd = env.empty() ? std::string() : env + " ";
    cmd += std::string(SUNNY_CP_BIN) + " " + args + " 2>" + err_path;

    CliResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_file(err_path);
    return r;
}

constexpr const char* kProblemText =
    "PROBLEM guard\n"
    "VAR x INT 0 9\n"
    "VAR y INT 0 9\n"
    "CON LIN 1*x + 1*y <= 10\n"
    "OBJ MIN 1*x + 1*y\n";

/// A ready-to-solve world: problem file, two scripted solvers, one config.
struct SolveWorld {
    TempDir dir;
    std::string problem;
    std::string config;

    SolveWorld() {
        problem = file("problem.mpd", kProblemText);
        file("m1.script", "AT 0.3 SOLUTION x=2,y=3\nAT 0.5 COMPLETE\n");
        file("m2.script", "AT 0.2 SOLUTION x=4,y=4\n");
        config = file("portfolio.ini",
                      "[portfolio]\n"
                      "timeout=20\n"
                      "cores=2\n"
                      "restart_threshold=5\n"
                      "\n"
                      "[solver m1]\n"
                      "cmd=" + cmd_for("m1.script") +
                      "\n"
                      "[solver m2]\n"
                      "cmd=" + cmd_for("m2.script") + "\n");
    }

    std::string file(const std::string& name, const std::string& text) {
        auto path = (std::filesystem::path(dir.path()) / name).string();
        write_file(path, text);
        return path;
    }

    std::string cmd_for(const std::string& script) const {
        return std::string(MOCK_SOLVER_BIN) + " --script " +
               (std::filesystem::path(dir.path()) / script).string() +
               " {problem} --bound={bound}";
    }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(dir.path()) / name).string();
    }
};

}  // namespace

TEST_CASE("solve: virtual clock, no selection, protocol output") {
    SolveWorld w;
    auto r = run_cli("solve " + w.problem + " --config " + w.config +
                     " --no-selection --virtual-clock");
    CHECK(r.code == 0);
    CHECK(r.out ==
          "x = 2\n"
          "y = 3\n"
          "----------\n"
          "==========\n");
    CHECK(r.err.empty());

    // The event log lands next to the problem by default.
    auto log = read_file(w.problem + ".events");
    auto events = parse_event_log(log);
    std::set<std::string> launched_at_zero;
    for (const auto& e : events)
        if (e.type == EventType::Launch && e.t_ms == 0) launched_at_zero.insert(e.solver);
    CHECK(launched_at_zero == std::set<std::string>{"m1", "m2"});

    // The solve output is itself valid solver protocol: the meta-solver can
    // be a solver in someone else's portfolio.
    auto parsed = parse_solver_output(r.out);
    REQUIRE(parsed.size() == 2);
    const auto* sol = std::get_if<SolutionEvent>(&parsed[0]);
    REQUIRE(sol != nullptr);
    CHECK(sol->assignment.at("x") == 2);
    CHECK(std::holds_alternative<CompleteEvent>(parsed[1]));
}

TEST_CASE("solve: ten virtual-clock runs are byte-identical") {
    SolveWorld w;
    std::set<std::string> outputs;
    std::set<std::string> logs;
    for (int i = 0; i < 10; ++i) {
        auto log_path = w.path("run" + std::to_string(i) + ".events");
        auto r = run_cli("solve " + w.problem + " --config " + w.config +
                         " --no-selection --virtual-clock --log " + log_path);
        REQUIRE(r.code == 0);
        outputs.insert(r.out);
        logs.insert(read_file(log_path));
    }
    CHECK(outputs.size() == 1);
    CHECK(logs.size() == 1);
}

TEST_CASE("solve: trained knowledge base drives selection") {
    SolveWorld w;

    // Three training instances, structurally identical to the query problem;
    // m1 cracked every one, m2 never did.
    std::string features_csv = "instance";
    for (std::size_t i = 1; i <= kBuiltinFeatureCount; ++i)
        features_csv += ",f" + std::to_string(i);
    features_csv += '\n';
    auto fv = extract_features(parse_problem(kProblemText));
    for (const auto& id : {"k1", "k2", "k3"}) {
        features_csv += id;
        for (double v : fv.values) features_csv += "," + format_double(v);
        features_csv += '\n';
    }
    auto features_path = w.file("features.csv", features_csv);
    auto runs_path = w.file("runs.csv",
                            "instance,solver,status,time,objective\n"
                            "k1,m1,sat,1,\n"
                            "k2,m1,sat,2,\n"
                            "k3,m1,sat,1,\n"
                            "k1,m2,unk,20,\n"
                            "k2,m2,unk,20,\n"
                            "k3,m2,unk,20,\n");

    auto kb_dir = w.path("kb");
    auto tr = run_cli("train " + features_path + " " + runs_path + " " + kb_dir + " -T 20");
    CHECK(tr.code == 0);
    CHECK(tr.out == "instances=3 solvers=2 runs=6\n");

    auto r = run_cli("solve " + w.problem + " --config " + w.config + " --kb " + kb_dir +
                     " --virtual-clock --log " + w.path("sel.events"));
    CHECK(r.code == 0);
    CHECK(r.out.find("==========") != std::string::npos);

    // Selection hands the whole window to m1; m2 never launches.
    auto log = read_file(w.path("sel.events"));
    CHECK(log.find("solver=m1") != std::string::npos);
    CHECK(log.find("solver=m2") == std::string::npos);
}

TEST_CASE("solve: schema mismatch between KB and extractor is refused") {
    SolveWorld w;
    auto features_path = w.file("flat.csv", "instance,f1,f2\nk1,0,0\nk2,1,1\n");
    auto runs_path = w.file("flat_runs.csv",
                            "instance,solver,status,time,objective\n"
                            "k1,m1,sat,1,\n"
                            "k2,m1,sat,1,\n");
    auto kb_dir = w.path("kb2d");
    REQUIRE(run_cli("train " + features_path + " " + runs_path + " " + kb_dir +
                    " -T 20 --schema flat2d")
                .code == 0);

    auto r = run_cli("solve " + w.problem + " --config " + w.config + " --kb " + kb_dir +
                     " --virtual-clock");
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("flat2d") != std::string::npos);
}

TEST_CASE("solve: selection without a knowledge base is an error") {
    SolveWorld w;
    auto r = run_cli("solve " + w.problem + " --config " + w.config + " --virtual-clock");
    CHECK(r.code == 1);
    CHECK(r.err.find("knowledge base") != std::string::npos);
    CHECK(r.err.find("--no-selection") != std::string::npos);
}

TEST_CASE("solve: config comes from the flag or the environment") {
    SolveWorld w;
    auto r = run_cli("solve " + w.problem + " --no-selection --virtual-clock");
    CHECK(r.code == 1);
    CHECK(r.err.find("no portfolio config") != std::string::npos);

    r = run_cli("solve " + w.problem + " --no-selection --virtual-clock",
                "PORTFOLIO_CONFIG=" + w.config);
    CHECK(r.code == 0);
    CHECK(r.out.find("==========") != std::string::npos);
}

TEST_CASE("cli: usage errors exit 2, help exits 0") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("solve").code == 2);               // missing problem
    CHECK(run_cli("frobnicate x").code == 2);        // unknown subcommand
    SolveWorld w;
    CHECK(run_cli("solve " + w.problem + " --config " + w.config + " --nope").code == 2);
    auto help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("solve") != std::string::npos);
    CHECK(help.out.find("train") != std::string::npos);
}

TEST_CASE("solve: flag validation failures exit 1 with a message") {
    SolveWorld w;
    auto r = run_cli("solve " + w.problem + " --config " + w.config +
                     " --no-selection --virtual-clock --restart-policy weird");
    CHECK(r.code == 1);
    CHECK(r.err.find("--restart-policy") != std::string::npos);

    r = run_cli("solve " + w.problem + " --config " + w.config +
                " --no-selection --virtual-clock --presolve nocolon");
    CHECK(r.code == 1);
    CHECK(r.err.find("--presolve") != std::string::npos);

    r = run_cli("solve " + w.problem + " --config " + w.config +
                " --no-selection --virtual-clock -T 0");
    CHECK(r.code == 1);
    CHECK(r.err.find("timeout") != std::string::npos);
}

TEST_CASE("solve: silence prints nothing and still exits 0") {
    SolveWorld w;
    w.file("quiet.script", "");
    auto config = w.file("quiet.ini",
                         "[portfolio]\n"
                         "timeout=1\n"
                         "restart_threshold=0.5\n"
                         "[solver q]\n"
                         "cmd=" + w.cmd_for("quiet.script") + "\n");
    auto r = run_cli("solve " + w.problem + " --config " + config +
                     " --no-selection --virtual-clock");
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    auto log = read_file(w.problem + ".events");
    CHECK(parse_event_log(log).size() == 2);  // LAUNCH and the final KILL
}

TEST_CASE("solve: a believed unsat claim prints the marker") {
    SolveWorld w;
    w.file("no.script", "AT 0.2 UNSAT\n");
    auto config = w.file("no.ini",
                         "[portfolio]\n"
                         "timeout=6\n"
                         "[solver n]\n"
                         "cmd=" + w.cmd_for("no.script") + "\n");
    auto r = run_cli("solve " + w.problem + " --config " + config +
                     " --no-selection --virtual-clock");
    CHECK(r.code == 0);
    CHECK(r.out == "=====UNSATISFIABLE=====\n");
}

TEST_CASE("solve: real clock end to end against the mock binary") {
    SolveWorld w;
    auto r = run_cli("solve " + w.problem + " --config " + w.config + " --no-selection -T 8");
    CHECK(r.code == 0);
    CHECK(r.out ==
          "x = 2\n"
          "y = 3\n"
          "----------\n"
          "==========\n");
}

TEST_CASE("score: rankings match the library on the committed fixture") {
    const std::string fixture = std::string(FIXTURE_DIR) + "/borda/results.csv";
    auto table = borda_score(parse_results_csv(read_file(fixture)), 1200);

    SolveWorld w;
    auto csv_path = w.path("ranking.csv");
    auto r = run_cli("score " + fixture + " --csv " + csv_path);
    CHECK(r.code == 0);

    std::string expected = "complete ranking:\n";
    expected += "  1. p " + format_double(table.at("p").complete) + '\n';
    expected += "  2. q " + format_double(table.at("q").complete) + '\n';
    expected += "  3. r " + format_double(table.at("r").complete) + '\n';
    expected += "incomplete ranking:\n";
    expected += "  1. p " + format_double(table.at("p").incomplete) + '\n';
    expected += "  2. q " + format_double(table.at("q").incomplete) + '\n';
    expected += "  3. r " + format_double(table.at("r").incomplete) + '\n';
    CHECK(r.out == expected);

    auto csv = read_file(csv_path);
    CHECK(csv.starts_with("solver,complete,incomplete\n"));
    CHECK(csv.find("p,") != std::string::npos);
}

TEST_CASE("simulate: replays a tiny test set against a trained KB") {
    SolveWorld w;
    auto features_path = w.file("sim_features.csv",
                                "instance,f1,f2\n"
                                "k1,0,0\n"
                                "k2,1,1\n"
                                "k3,10,10\n");
    auto runs_path = w.file("sim_runs.csv",
                            "instance,solver,status,time,objective\n"
                            "k1,s1,sat,1,\n"
                            "k2,s1,sat,1,\n"
                            "k3,s1,sat,1,\n"
                            "k1,s2,unk,100,\n"
                            "k2,s2,unk,100,\n"
                            "k3,s2,unk,100,\n");
    auto kb_dir = w.path("simkb");
    REQUIRE(run_cli("train " + features_path + " " + runs_path + " " + kb_dir +
                    " -T 100 --schema flat2d")
                .code == 0);

    auto test_dir = w.path("testset");
    std::filesystem::create_directories(test_dir);
    write_file(test_dir + "/features.csv", "instance,f1,f2\nt1,0.5,0.5\n");
    write_file(test_dir + "/runs.csv",
               "instance,solver,status,time,objective\n"
               "t1,s1,sat,2,\n"
               "t1,s2,unk,100,\n");
    write_file(test_dir + "/trails.csv", "instance,solver,time,objective\n");

    auto r = run_cli("simulate --kb " + kb_dir + " --test " + test_dir + " -k 2 -T 100 -c 2");
    CHECK(r.code == 0);
    CHECK(r.out.starts_with("instances=1 solved=1 avg_time=2\n"));
    CHECK(r.out.find("t1,sunny,sat,2") != std::string::npos);

    // --out sends the CSV to a file instead.
    auto out_path = w.path("sim.csv");
    r = run_cli("simulate --kb " + kb_dir + " --test " + test_dir + " -k 2 -T 100 -c 2 --out " +
                out_path);
    CHECK(r.code == 0);
    CHECK(r.out == "instances=1 solved=1 avg_time=2\n");
    CHECK(read_file(out_path).find("t1,sunny,sat,2") != std::string::npos);
}

TEST_CASE("train: validation failures exit 1") {
    SolveWorld w;
    auto features_path = w.file("tv.csv", "instance,f1\nk1,0\n");
    auto runs_path = w.file("tv_runs.csv",
                            "instance,solver,status,time,objective\n"
                            "k1,s1,sat,5,\n");
    // Run time 5 exceeds the declared training timeout.
    auto r = run_cli("train " + features_path + " " + runs_path + " " + w.path("tvkb") +
                     " -T 2 --schema one1d");
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}
