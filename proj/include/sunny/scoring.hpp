#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/io.hpp"

namespace sunny {

enum class AnswerKind { Optimal, Sat, Unsat, Unknown, Wrong };
enum class Direction { Min, Max, None };

inline std::string answer_kind_token(AnswerKind k) {
    switch (k) {
        case AnswerKind::Optimal: return "opt";
        case AnswerKind::Sat: return "sat";
        case AnswerKind::Unsat: return "unsat";
        case AnswerKind::Unknown: return "unk";
        case AnswerKind::Wrong: return "wrong";
    }
    return "?";
}

inline std::optional<AnswerKind> answer_kind_from_token(std::string_view t) {
    if (t == "opt") return AnswerKind::Optimal;
    if (t == "sat") return AnswerKind::Sat;
    if (t == "unsat") return AnswerKind::Unsat;
    if (t == "unk") return AnswerKind::Unknown;
    if (t == "wrong") return AnswerKind::Wrong;
    return std::nullopt;
}

inline std::string direction_token(Direction d) {
    switch (d) {
        case Direction::Min: return "min";
        case Direction::Max: return "max";
        case Direction::None: return "none";
    }
    return "?";
}

inline std::optional<Direction> direction_from_token(std::string_view t) {
    if (t == "min") return Direction::Min;
    if (t == "max") return Direction::Max;
    if (t == "none") return Direction::None;
    return std::nullopt;
}

/// One solver's final outcome on one instance, as fed to the tournament.
struct InstanceResult {
    std::string instance;
    std::string solver;
    AnswerKind kind = AnswerKind::Unknown;
    double time = 0.0;  // seconds, in [0, T]
    std::optional<std::int64_t> objective;
    Direction direction = Direction::None;
};

enum class ScoreMode { Complete, Incomplete };

struct SolverScore {
    double complete = 0.0;
    double incomplete = 0.0;
};

using ScoreTable = std::map<std::string, SolverScore>;

/// Total order (up to ties) on answers. Tiers from worst to best: wrong,
/// no answer, solution without proof, complete answer. Within a tier, answers
/// compare by objective merit when both carry one; otherwise they are
/// indistinguishable and the time split applies.
struct AnswerQuality {
    int tier = 0;
    std::optional<double> merit;  // larger is better

    /// -1 / 0 / +1 for worse / indistinguishable / better.
    int compare(const AnswerQuality& other) const {
        if (tier != other.tier) return tier < other.tier ? -1 : 1;
        if (merit && other.merit && *merit != *other.merit) return *merit < *other.merit ? -1 : 1;
        return 0;
    }
};

inline AnswerQuality answer_quality(const InstanceResult& r, ScoreMode mode) {
    AnswerQuality q;
    auto merit_of = [&](std::int64_t obj) -> std::optional<double> {
        if (r.direction == Direction::Min) return -static_cast<double>(obj);
        if (r.direction == Direction::Max) return static_cast<double>(obj);
        return std::nullopt;
    };
    switch (r.kind) {
        case AnswerKind::Wrong:
            q.tier = 0;
            break;
        case AnswerKind::Unknown:
            q.tier = 1;
            break;
        case AnswerKind::Unsat:
            // A proof with no solution attached: worth a complete answer in
            // complete mode, worth nothing once proofs stop counting.
            q.tier = mode == ScoreMode::Complete ? 3 : 1;
            break;
        case AnswerKind::Sat:
            q.tier = 2;
            if (r.direction == Direction::None) {
                // On satisfaction instances, finding a solution settles the
                // problem, so sat is a complete answer there.
                if (mode == ScoreMode::Complete) q.tier = 3;
            } else if (r.objective) {
                q.merit = merit_of(*r.objective);
            }
            break;
        case AnswerKind::Optimal:
            q.tier = mode == ScoreMode::Complete ? 3 : 2;
            if (r.objective) q.merit = merit_of(*r.objective);
            break;
    }
    return q;
}

/// Borda comparison of two answers to the same instance. Strictly better
/// earns the point; indistinguishable answers split it by solving time
/// (t_opponent / (t_a + t_b)); two no-answers split evenly. A wrong answer
/// earns 0 and its opponent is scored as if facing an unknown at time T.
inline std::pair<double, double> pairwise_score(const InstanceResult& a, const InstanceResult& b,
                                                ScoreMode mode, double t) {
    if (a.instance != b.instance)
        throw Error("pairwise_score: results for different instances ('" + a.instance + "' vs '" +
                    b.instance + "')");

    if (a.kind == AnswerKind::Wrong || b.kind == AnswerKind::Wrong) {
        if (a.kind == AnswerKind::Wrong && b.kind == AnswerKind::Wrong) return {0.0, 0.0};
        InstanceResult unknown;
        unknown.instance = a.instance;
        unknown.kind = AnswerKind::Unknown;
        unknown.time = t;
        unknown.direction = a.direction;
        if (a.kind == AnswerKind::Wrong) return {0.0, pairwise_score(b, unknown, mode, t).first};
        return {pairwise_score(a, unknown, mode, t).first, 0.0};
    }

    const AnswerQuality qa = answer_quality(a, mode);
    const AnswerQuality qb = answer_quality(b, mode);
    const int cmp = qa.compare(qb);
    if (cmp > 0) return {1.0, 0.0};
    if (cmp < 0) return {0.0, 1.0};
    if (qa.tier <= 1) return {0.5, 0.5};  // neither produced an answer
    const double sum = a.time + b.time;
    if (sum <= 0) return {0.5, 0.5};
    return {b.time / sum, a.time / sum};
}

/// Round-robin totals: every solver meets every other solver on every
/// instance; a solver with no row on an instance competes as unknown at T.
inline ScoreTable borda_score(const std::vector<InstanceResult>& results, double t) {
    std::set<std::string> solvers;
    std::map<std::string, Direction> direction;
    std::map<std::string, std::map<std::string, InstanceResult>> by_instance;
    for (const auto& r : results) {
        solvers.insert(r.solver);
        if (!by_instance[r.instance].emplace(r.solver, r).second)
            throw Error("borda_score: duplicate result for (" + r.solver + ", " + r.instance + ")");
        auto [it, fresh] = direction.emplace(r.instance, r.direction);
        if (!fresh && it->second != r.direction)
            throw Error("borda_score: conflicting objective directions for '" + r.instance + "'");
    }

    ScoreTable table;
    for (const auto& s : solvers) table.emplace(s, SolverScore{});

    for (const auto& [instance, rows] : by_instance) {
        auto result_of = [&](const std::string& solver) -> InstanceResult {
            auto it = rows.find(solver);
            if (it != rows.end()) return it->second;
            InstanceResult missing;
            missing.instance = instance;
            missing.solver = solver;
            missing.kind = AnswerKind::Unknown;
            missing.time = t;
            missing.direction = direction.at(instance);
            return missing;
        };
        for (auto i = solvers.begin(); i != solvers.end(); ++i) {
            for (auto j = std::next(i); j != solvers.end(); ++j) {
                const InstanceResult ra = result_of(*i);
                const InstanceResult rb = result_of(*j);
                auto [ca, cb] = pairwise_score(ra, rb, ScoreMode::Complete, t);
                auto [ia, ib] = pairwise_score(ra, rb, ScoreMode::Incomplete, t);
                table[*i].complete += ca;
                table[*j].complete += cb;
                table[*i].incomplete += ia;
                table[*j].incomplete += ib;
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// results.csv: instance,solver,kind,time,objective,direction
// ---------------------------------------------------------------------------

inline std::vector<InstanceResult> parse_results_csv(const std::string& text) {
    auto lines = to_lines(text);
    if (lines.empty()) throw ParseError("results.csv: empty file");
    if (trim(lines[0]) != "instance,solver,kind,time,objective,direction")
        throw ParseError("results.csv: header must be instance,solver,kind,time,objective,direction",
                         1);
    std::vector<InstanceResult> out;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        auto fields = split(lines[n], ',');
        if (fields.size() != 6) throw ParseError("results.csv: expected 6 fields", n + 1);
        InstanceResult r;
        r.instance = trim(fields[0]);
        r.solver = trim(fields[1]);
        if (!is_identifier(r.instance) || !is_identifier(r.solver))
            throw ParseError("results.csv: bad instance/solver id", n + 1);
        auto kind = answer_kind_from_token(trim(fields[2]));
        if (!kind) throw ParseError("results.csv: bad kind '" + std::string(trim(fields[2])) + "'", n + 1);
        r.kind = *kind;
        r.time = parse_double(fields[3], n + 1);
        if (r.time < 0) throw ParseError("results.csv: negative time", n + 1);
        if (!trim(fields[4]).empty()) r.objective = parse_int(fields[4], n + 1);
        auto dir = direction_from_token(trim(fields[5]));
        if (!dir) throw ParseError("results.csv: bad direction '" + std::string(trim(fields[5])) + "'", n + 1);
        r.direction = *dir;
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string serialize_results_csv(const std::vector<InstanceResult>& results) {
    std::ostringstream os;
    os << "instance,solver,kind,time,objective,direction\n";
    for (const auto& r : results) {
        os << r.instance << ',' << r.solver << ',' << answer_kind_token(r.kind) << ','
           << format_double(r.time) << ',';
        if (r.objective) os << *r.objective;
        os << ',' << direction_token(r.direction) << '\n';
    }
    return os.str();
}

}  // namespace sunny
