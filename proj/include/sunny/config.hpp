#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/io.hpp"

namespace sunny {

/// How one constituent solver is invoked and how far it is trusted.
struct SolverSpec {
    std::string id;
    /// argv tokens; must contain `{problem}` exactly once (as a substring of
    /// one token). Tokens containing `{bound}` receive the strict-improvement
    /// cap when a bound is injected and are dropped when none is.
    std::vector<std::string> command;
    /// Solutions must pass check_solution before they count.
    bool check = true;
    /// Whether this solver's complete/unsat claims may end the run.
    bool reliable_completion = true;
};

inline std::size_t count_occurrences(const std::vector<std::string>& tokens,
                                     std::string_view needle) {
    std::size_t n = 0;
    for (const auto& tok : tokens) {
        for (std::size_t at = tok.find(needle); at != std::string::npos;
             at = tok.find(needle, at + needle.size()))
            ++n;
    }
    return n;
}

inline void validate_solver_spec(const SolverSpec& spec) {
    if (spec.id.empty() || !is_identifier(spec.id))
        throw Error("solver spec: bad id '" + spec.id + "'");
    if (spec.command.empty()) throw Error("solver '" + spec.id + "': empty command");
    if (count_occurrences(spec.command, "{problem}") != 1)
        throw Error("solver '" + spec.id + "': command must contain {problem} exactly once");
}

enum class RestartPolicy { All, Any };

inline std::optional<RestartPolicy> restart_policy_from_token(std::string_view t) {
    if (t == "all") return RestartPolicy::All;
    if (t == "any") return RestartPolicy::Any;
    return std::nullopt;
}

struct PresolveSpec {
    std::vector<std::string> solvers;
    double seconds = 0.0;
};

/// Everything a solve run needs to know. File values fill these fields first;
/// command-line flags overwrite them afterwards.
struct ExecConfig {
    double timeout = 1200.0;        // T
    int cores = 8;                  // c
    std::size_t knn = 70;           // k
    double restart_threshold = 5.0; // T_r
    RestartPolicy restart_policy = RestartPolicy::All;
    std::optional<PresolveSpec> presolve;
    std::map<std::string, SolverSpec> solvers;
    std::vector<std::string> solver_order;  // file order; drives --no-selection
    std::string kb_dir;
    bool virtual_clock = false;
    std::string problem_path;  // substituted for {problem} at launch

    void validate() const {
        if (timeout <= 0) throw Error("config: timeout must be positive");
        if (cores < 1) throw Error("config: cores must be at least 1");
        if (knn < 1) throw Error("config: knn must be at least 1");
        if (restart_threshold <= 0 || restart_threshold >= timeout)
            throw Error("config: restart threshold must lie strictly inside (0, timeout)");
        if (solvers.empty()) throw Error("config: no solvers configured");
        for (const auto& [id, spec] : solvers) validate_solver_spec(spec);
        if (presolve) {
            if (presolve->solvers.empty()) throw Error("config: presolve needs solver ids");
            if (presolve->seconds <= 0 || presolve->seconds >= timeout)
                throw Error("config: presolve budget must lie strictly inside (0, timeout)");
            for (const auto& id : presolve->solvers)
                if (!solvers.count(id))
                    throw Error("config: presolve solver '" + id + "' is not configured");
        }
    }
};

namespace detail {

inline bool parse_bool(std::string_view v, std::size_t line_no) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError("expected true or false, got '" + std::string(v) + "'", line_no);
}

}  // namespace detail

/// Parses the portfolio config file:
///
///   [portfolio]
///   timeout=1200            # optional; same keys the flags cover
///   cores=8
///   knn=70
///   restart_threshold=5
///   restart_policy=all
///   kb=path/to/kb
///
///   [solver cbc]
///   cmd=mock-solver --script cbc.script {problem} --bound={bound}
///   check=true
///   trusted_completion=true
///
/// Applies file values on top of `base` and returns the result.
inline ExecConfig parse_portfolio_config(const std::string& text, ExecConfig base = {}) {
    enum class Section { None, Portfolio, Solver };
    Section section = Section::None;
    SolverSpec current;
    bool have_cmd = false;

    auto flush_solver = [&]() {
        if (section != Section::Solver) return;
        if (!have_cmd) throw Error("config: solver '" + current.id + "' has no cmd");
        if (!base.solvers.emplace(current.id, current).second)
            throw Error("config: duplicate solver '" + current.id + "'");
        base.solver_order.push_back(current.id);
    };

    auto lines = to_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto line = trim(lines[n]);
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", n + 1);
            flush_solver();
            auto name = trim(line.substr(1, line.size() - 2));
            if (name == "portfolio") {
                section = Section::Portfolio;
            } else if (name.starts_with("solver")) {
                auto id = trim(name.substr(6));
                if (id.empty() || !is_identifier(id))
                    throw ParseError("bad solver section '" + std::string(name) + "'", n + 1);
                section = Section::Solver;
                current = SolverSpec{};
                current.id = std::string(id);
                have_cmd = false;
            } else {
                throw ParseError("unknown section '" + std::string(name) + "'", n + 1);
            }
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", n + 1);
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));

        if (section == Section::Portfolio) {
            if (key == "timeout") base.timeout = parse_double(value, n + 1);
            else if (key == "cores") base.cores = static_cast<int>(parse_int(value, n + 1));
            else if (key == "knn") base.knn = static_cast<std::size_t>(parse_int(value, n + 1));
            else if (key == "restart_threshold") base.restart_threshold = parse_double(value, n + 1);
            else if (key == "restart_policy") {
                auto policy = restart_policy_from_token(value);
                if (!policy) throw ParseError("restart_policy must be all or any", n + 1);
                base.restart_policy = *policy;
            } else if (key == "kb") {
                base.kb_dir = std::string(value);
            } else {
                throw ParseError("unknown portfolio key '" + std::string(key) + "'", n + 1);
            }
        } else if (section == Section::Solver) {
            if (key == "cmd") {
                for (auto tok : split_ws(value)) current.command.emplace_back(tok);
                have_cmd = true;
            } else if (key == "check") {
                current.check = detail::parse_bool(value, n + 1);
            } else if (key == "trusted_completion") {
                current.reliable_completion = detail::parse_bool(value, n + 1);
            } else {
                throw ParseError("unknown solver key '" + std::string(key) + "'", n + 1);
            }
        } else {
            throw ParseError("key=value before any section", n + 1);
        }
    }
    flush_solver();
    return base;
}

inline ExecConfig load_portfolio_config(const std::string& path, ExecConfig base = {}) {
    try {
        return parse_portfolio_config(read_file(path), std::move(base));
    } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace sunny
