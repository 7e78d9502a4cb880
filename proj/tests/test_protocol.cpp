#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sunny/config.hpp"
#include "sunny/mock_script.hpp"
#include "sunny/protocol.hpp"

using namespace sunny;

TEST_CASE("a stream of solution blocks and a completion marker") {
    auto events = parse_solver_output(
        "x = 3\n"
        "y = -7\n"
        "----------\n"
        "x = 2\n"
        "y = 0\n"
        "----------\n"
        "==========\n");
    REQUIRE(events.size() == 3);
    const auto& first = std::get<SolutionEvent>(events[0]);
    CHECK(first.assignment.at("x") == 3);
    CHECK(first.assignment.at("y") == -7);
    CHECK(std::get<SolutionEvent>(events[1]).assignment.at("x") == 2);
    CHECK(std::holds_alternative<CompleteEvent>(events[2]));
}

TEST_CASE("unsat marker and whitespace tolerance") {
    auto events = parse_solver_output("  =====UNSATISFIABLE=====  \n");
    REQUIRE(events.size() == 1);
    CHECK(std::holds_alternative<UnsatEvent>(events[0]));

    events = parse_solver_output("   x   =   5\n  ----------\t\n");
    REQUIRE(events.size() == 1);
    CHECK(std::get<SolutionEvent>(events[0]).assignment.at("x") == 5);
}

TEST_CASE("a malformed assignment value poisons exactly its own block") {
    OutputParser p;
    CHECK(p.feed_line("x = twelve").empty());
    auto events = p.feed_line("----------");
    REQUIRE(events.size() == 1);
    const auto& err = std::get<ProtocolErrorEvent>(events[0]);
    CHECK(err.message.find("line 1") != std::string::npos);
    CHECK(err.message.find("twelve") != std::string::npos);

    // The parser recovers: the next block is clean.
    CHECK(p.feed_line("x = 4").empty());
    events = p.feed_line("----------");
    REQUIRE(events.size() == 1);
    CHECK(std::get<SolutionEvent>(events[0]).assignment.at("x") == 4);
}

TEST_CASE("noise is remembered as warnings, never as events") {
    OutputParser p;
    CHECK(p.feed_line("solver v1.2 starting...").empty());
    CHECK(p.feed_line("% stats: 42 nodes").empty());
    CHECK(p.feed_line("a = b = c").empty());       // two '=' cannot be an assignment
    CHECK(p.feed_line("3 = x").empty());           // left side is not an identifier
    REQUIRE(p.warnings().size() == 4);
    CHECK(p.warnings()[0].find("line 1") != std::string::npos);
    CHECK(p.warnings()[3].find("3 = x") != std::string::npos);
    CHECK_FALSE(p.has_partial_block());
}

TEST_CASE("partial blocks are visible and empty lines are skipped") {
    OutputParser p;
    p.feed_line("");
    CHECK_FALSE(p.has_partial_block());
    p.feed_line("x = 1");
    CHECK(p.has_partial_block());
    p.feed_line("----------");
    CHECK_FALSE(p.has_partial_block());
    p.feed_line("x = oops");
    CHECK(p.has_partial_block());  // poisoned counts as partial
}

TEST_CASE("the parser survives arbitrary printable garbage") {
    std::mt19937 rng(1123);
    const std::vector<std::string> vocab = {
        "x",   "=",     "12",        "----------", "==========", "=====UNSATISFIABLE=====",
        "y=3", "%%%%",  "x = = 3",   "_id",        "-9",         "nan",
        "",    "   ",   "a_b = -42", "= = =",      "x =",        "= 5",
    };
    for (int iter = 0; iter < 300; ++iter) {
        OutputParser p;
        int solutions = 0;
        for (int i = 0; i < 40; ++i) {
            std::string line;
            const int words = static_cast<int>(rng() % 3);
            for (int w = 0; w <= words; ++w) {
                if (w) line += ' ';
                line += vocab[rng() % vocab.size()];
            }
            for (const auto& ev : p.feed_line(line)) {
                // Any SolutionEvent must carry only identifier keys.
                if (const auto* sol = std::get_if<SolutionEvent>(&ev)) {
                    ++solutions;
                    for (const auto& [id, v] : sol->assignment) CHECK(is_identifier(id));
                }
            }
        }
        (void)solutions;
    }
}

TEST_CASE("mock script: parsing, guards and ordering") {
    MockScript script = parse_mock_script(
        "# solver B: improves once it hears a bound\n"
        "\n"
        "AT 2 SOLUTION x=1, y = 2\n"
        "IFBOUND < 10 AT 1 SOLUTION x=0,y=0\n"
        "IFBOUND >= 5 AT 1.5 COMPLETE\n"
        "AT 0.25 UNSAT\n");
    REQUIRE(script.size() == 4);
    CHECK(script[0].kind == ScriptAction::Kind::Solution);
    CHECK(script[0].at_seconds == 2.0);
    CHECK(script[0].assignment.at("y") == 2);
    CHECK_FALSE(script[0].guard.has_value());
    REQUIRE(script[1].guard.has_value());
    CHECK(script[1].guard->rel == BoundRelation::Less);
    CHECK(script[1].guard->value == 10);
    CHECK(script[3].kind == ScriptAction::Kind::Unsat);

    // Without a bound, guarded lines are dead.
    MockScript none = enabled_actions(script, std::nullopt);
    REQUIRE(none.size() == 2);
    CHECK(none[0].kind == ScriptAction::Kind::Unsat);     // 0.25 first
    CHECK(none[1].kind == ScriptAction::Kind::Solution);  // 2.0 second

    // bound=7: "< 10" fires, ">= 5" fires too.
    MockScript seven = enabled_actions(script, 7);
    REQUIRE(seven.size() == 4);
    CHECK(seven[0].at_seconds == 0.25);
    CHECK(seven[1].at_seconds == 1.0);
    CHECK(seven[2].at_seconds == 1.5);
    CHECK(seven[3].at_seconds == 2.0);

    // bound=3: "< 10" fires, ">= 5" does not.
    CHECK(enabled_actions(script, 3).size() == 3);
}

TEST_CASE("mock script rejects malformed lines with line numbers") {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_mock_script(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("AT 1 COMPLETE\nAT x COMPLETE\n") == 2);
    CHECK(line_of("IFBOUND ~ 5 AT 1 COMPLETE\n") == 1);
    CHECK(line_of("AT -1 COMPLETE\n") == 1);
    CHECK(line_of("AT 1 EXPLODE\n") == 1);
    CHECK(line_of("AT 1 SOLUTION\n") == 1);
    CHECK(line_of("AT 1 SOLUTION x=\n") == 1);
    CHECK(line_of("AT 1 SOLUTION 3=4\n") == 1);
    CHECK(line_of("AT 1 COMPLETE extra\n") == 1);
    CHECK(line_of("COMPLETE\n") == 1);
    CHECK_THROWS_AS(parse_script_line("", 1), ParseError);
}

TEST_CASE("render_action emits exactly the wire protocol") {
    ScriptAction sol;
    sol.kind = ScriptAction::Kind::Solution;
    sol.assignment = {{"y", 2}, {"x", 1}};
    CHECK(render_action(sol) == std::vector<std::string>{"x = 1", "y = 2", "----------"});

    ScriptAction done;
    done.kind = ScriptAction::Kind::Complete;
    CHECK(render_action(done) == std::vector<std::string>{"=========="});

    ScriptAction unsat;
    unsat.kind = ScriptAction::Kind::Unsat;
    CHECK(render_action(unsat) == std::vector<std::string>{"=====UNSATISFIABLE====="});

    // Round trip: rendered lines parse back to the same assignment.
    OutputParser p;
    std::vector<OutputEvent> events;
    for (const auto& line : render_action(sol))
        for (auto& e : p.feed_line(line)) events.push_back(std::move(e));
    REQUIRE(events.size() == 1);
    CHECK(std::get<SolutionEvent>(events[0]).assignment == sol.assignment);
}

TEST_CASE("find_flag_value handles both argv spellings") {
    std::vector<std::string> args = {"mock", "--script", "a.txt", "--bound=42", "{problem}"};
    CHECK(find_flag_value(args, "--script") == "a.txt");
    CHECK(find_flag_value(args, "--bound") == "42");
    CHECK_FALSE(find_flag_value(args, "--missing").has_value());
    CHECK_FALSE(find_flag_value({"--script"}, "--script").has_value());  // value missing
}

TEST_CASE("portfolio config: full file, defaults and overlays") {
    ExecConfig cfg = parse_portfolio_config(
        "# demo portfolio\n"
        "[portfolio]\n"
        "timeout=300\n"
        "cores=4\n"
        "knn=10\n"
        "restart_threshold=2.5\n"
        "restart_policy=any\n"
        "kb=some/dir\n"
        "\n"
        "[solver beta]\n"
        "cmd=run-beta {problem} --bound={bound}\n"
        "check=false\n"
        "\n"
        "[solver alpha]\n"
        "cmd=run-alpha {problem}\n"
        "trusted_completion=false\n");
    CHECK(cfg.timeout == 300.0);
    CHECK(cfg.cores == 4);
    CHECK(cfg.knn == 10);
    CHECK(cfg.restart_threshold == 2.5);
    CHECK(cfg.restart_policy == RestartPolicy::Any);
    CHECK(cfg.kb_dir == "some/dir");
    REQUIRE(cfg.solvers.size() == 2);
    CHECK(cfg.solver_order == std::vector<std::string>{"beta", "alpha"});  // file order
    CHECK(cfg.solvers.at("beta").command ==
          std::vector<std::string>{"run-beta", "{problem}", "--bound={bound}"});
    CHECK_FALSE(cfg.solvers.at("beta").check);
    CHECK(cfg.solvers.at("beta").reliable_completion);
    CHECK(cfg.solvers.at("alpha").check);
    CHECK_FALSE(cfg.solvers.at("alpha").reliable_completion);
    CHECK_NOTHROW(cfg.validate());

    // Untouched keys keep the defaults.
    ExecConfig bare = parse_portfolio_config("[solver s]\ncmd=s {problem}\n");
    CHECK(bare.timeout == 1200.0);
    CHECK(bare.cores == 8);
    CHECK(bare.knn == 70);
    CHECK(bare.restart_threshold == 5.0);
    CHECK(bare.restart_policy == RestartPolicy::All);
}

TEST_CASE("portfolio config rejects malformed input") {
    CHECK_THROWS_AS(parse_portfolio_config("[weird]\n"), ParseError);
    CHECK_THROWS_AS(parse_portfolio_config("key=value\n"), ParseError);
    CHECK_THROWS_AS(parse_portfolio_config("[portfolio]\nwat=1\n"), ParseError);
    CHECK_THROWS_AS(parse_portfolio_config("[portfolio\n"), ParseError);
    CHECK_THROWS_AS(parse_portfolio_config("[solver]\n"), ParseError);
    CHECK_THROWS_AS(parse_portfolio_config("[solver a]\ncheck=true\n"), Error);  // no cmd
    CHECK_THROWS_AS(parse_portfolio_config("[solver a]\ncmd=a {problem}\ncheck=maybe\n"),
                    ParseError);
    CHECK_THROWS_AS(
        parse_portfolio_config("[solver a]\ncmd=a {problem}\n[solver a]\ncmd=b {problem}\n"),
        Error);
    CHECK_THROWS_AS(parse_portfolio_config("[portfolio]\nrestart_policy=sometimes\n"), ParseError);
}

TEST_CASE("exec config validation catches bad combinations") {
    ExecConfig good = parse_portfolio_config("[solver s]\ncmd=s {problem}\n");
    CHECK_NOTHROW(good.validate());

    ExecConfig c = good;
    c.timeout = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.cores = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.knn = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.restart_threshold = c.timeout;  // must be strictly inside (0, T)
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.solvers.clear();
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.presolve = PresolveSpec{{"ghost"}, 10};
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.presolve = PresolveSpec{{"s"}, c.timeout + 1};
    CHECK_THROWS_AS(c.validate(), Error);
    c = good;
    c.presolve = PresolveSpec{{"s"}, 10};
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("solver commands must name {problem} exactly once") {
    SolverSpec spec;
    spec.id = "s";
    spec.command = {"run", "{problem}"};
    CHECK_NOTHROW(validate_solver_spec(spec));
    spec.command = {"run"};
    CHECK_THROWS_AS(validate_solver_spec(spec), Error);
    spec.command = {"run", "{problem}", "{problem}"};
    CHECK_THROWS_AS(validate_solver_spec(spec), Error);
    spec.command = {"run", "{problem}{problem}"};
    CHECK_THROWS_AS(validate_solver_spec(spec), Error);
    spec.id = "has space";
    spec.command = {"run", "{problem}"};
    CHECK_THROWS_AS(validate_solver_spec(spec), Error);
    CHECK(count_occurrences({"a{x}b{x}", "{x}"}, "{x}") == 3);
}
