#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/io.hpp"
#include "sunny/problem.hpp"
#include "sunny/protocol.hpp"

namespace sunny {

// Scripted solver behavior, one action per line:
//
//   [IFBOUND <rel> <int>] AT <seconds> SOLUTION <id>=<int>[,<id>=<int>...]
//   [IFBOUND <rel> <int>] AT <seconds> COMPLETE
//   [IFBOUND <rel> <int>] AT <seconds> UNSAT
//
// AT is relative to process start. A guarded line only fires when the process
// was invoked with a --bound value satisfying the relation; without --bound,
// guarded lines are dead. rel ∈ {<, <=, >, >=, =, !=}.

enum class BoundRelation { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

inline std::optional<BoundRelation> bound_relation_from_token(std::string_view t) {
    if (t == "<") return BoundRelation::Less;
    if (t == "<=") return BoundRelation::LessEqual;
    if (t == ">") return BoundRelation::Greater;
    if (t == ">=") return BoundRelation::GreaterEqual;
    if (t == "=") return BoundRelation::Equal;
    if (t == "!=") return BoundRelation::NotEqual;
    return std::nullopt;
}

inline bool bound_relation_holds(std::int64_t lhs, BoundRelation rel, std::int64_t rhs) {
    switch (rel) {
        case BoundRelation::Less: return lhs < rhs;
        case BoundRelation::LessEqual: return lhs <= rhs;
        case BoundRelation::Greater: return lhs > rhs;
        case BoundRelation::GreaterEqual: return lhs >= rhs;
        case BoundRelation::Equal: return lhs == rhs;
        case BoundRelation::NotEqual: return lhs != rhs;
    }
    return false;
}

struct ScriptGuard {
    BoundRelation rel = BoundRelation::Less;
    std::int64_t value = 0;
};

struct ScriptAction {
    enum class Kind { Solution, Complete, Unsat } kind = Kind::Complete;
    std::optional<ScriptGuard> guard;
    double at_seconds = 0.0;
    Assignment assignment;  // Solution only
};

using MockScript = std::vector<ScriptAction>;

inline ScriptAction parse_script_line(std::string_view line, std::size_t line_no) {
    auto tokens = split_ws(line);
    std::size_t pos = 0;
    auto need = [&](const char* what) -> std::string_view {
        if (pos >= tokens.size())
            throw ParseError(std::string("expected ") + what, line_no);
        return tokens[pos++];
    };

    ScriptAction action;
    if (tokens.empty()) throw ParseError("empty action line", line_no);
    if (tokens[pos] == "IFBOUND") {
        ++pos;
        ScriptGuard guard;
        auto rel = bound_relation_from_token(need("relation after IFBOUND"));
        if (!rel) throw ParseError("bad IFBOUND relation", line_no);
        guard.rel = *rel;
        guard.value = parse_int(need("integer after IFBOUND relation"), line_no);
        action.guard = guard;
    }
    if (need("AT") != "AT") throw ParseError("expected AT", line_no);
    action.at_seconds = parse_double(need("time after AT"), line_no);
    if (action.at_seconds < 0) throw ParseError("AT time must be non-negative", line_no);

    const std::string_view verb = need("SOLUTION, COMPLETE, or UNSAT");
    if (verb == "COMPLETE") {
        action.kind = ScriptAction::Kind::Complete;
    } else if (verb == "UNSAT") {
        action.kind = ScriptAction::Kind::Unsat;
    } else if (verb == "SOLUTION") {
        action.kind = ScriptAction::Kind::Solution;
        // The assignment may contain spaces around commas; rejoin and resplit.
        std::string rest;
        while (pos < tokens.size()) {
            rest += tokens[pos++];
        }
        if (rest.empty()) throw ParseError("SOLUTION needs at least one <id>=<int>", line_no);
        for (auto piece : split(rest, ',')) {
            auto eq = split(piece, '=');
            if (eq.size() != 2 || !is_identifier(trim(eq[0])))
                throw ParseError("bad SOLUTION assignment '" + std::string(piece) + "'", line_no);
            action.assignment[std::string(trim(eq[0]))] = parse_int(eq[1], line_no);
        }
    } else {
        throw ParseError("unknown action '" + std::string(verb) + "'", line_no);
    }
    if (pos != tokens.size() && action.kind != ScriptAction::Kind::Solution)
        throw ParseError("trailing tokens after action", line_no);
    return action;
}

inline MockScript parse_mock_script(const std::string& text) {
    MockScript script;
    auto lines = to_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto line = trim(lines[n]);
        if (line.empty() || line[0] == '#') continue;
        script.push_back(parse_script_line(line, n + 1));
    }
    return script;
}

inline MockScript load_mock_script(const std::string& path) {
    try {
        return parse_mock_script(read_file(path));
    } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
    }
}

inline bool guard_enabled(const ScriptAction& action, std::optional<std::int64_t> bound) {
    if (!action.guard) return true;
    if (!bound) return false;
    return bound_relation_holds(*bound, action.guard->rel, action.guard->value);
}

/// The actions that fire for a given --bound, sorted by time (stable, so
/// equal-time actions keep file order).
inline MockScript enabled_actions(const MockScript& script, std::optional<std::int64_t> bound) {
    MockScript out;
    for (const auto& a : script)
        if (guard_enabled(a, bound)) out.push_back(a);
    std::stable_sort(out.begin(), out.end(),
                     [](const ScriptAction& a, const ScriptAction& b) {
                         return a.at_seconds < b.at_seconds;
                     });
    return out;
}

/// Protocol lines for one action — exactly what the mock binary prints.
inline std::vector<std::string> render_action(const ScriptAction& action) {
    std::vector<std::string> lines;
    switch (action.kind) {
        case ScriptAction::Kind::Solution:
            for (const auto& [id, value] : action.assignment)
                lines.push_back(id + " = " + std::to_string(value));
            lines.emplace_back(kSolutionSeparator);
            break;
        case ScriptAction::Kind::Complete:
            lines.emplace_back(kCompleteMarker);
            break;
        case ScriptAction::Kind::Unsat:
            lines.emplace_back(kUnsatMarker);
            break;
    }
    return lines;
}

/// Scans an argv-style token list for `--flag value` or `--flag=value`.
inline std::optional<std::string> find_flag_value(const std::vector<std::string>& args,
                                                  std::string_view flag) {
    const std::string prefix = std::string(flag) + "=";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
        if (args[i].starts_with(prefix)) return args[i].substr(prefix.size());
    }
    return std::nullopt;
}

}  // namespace sunny
