#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/executor.hpp"
#include "sunny/knowledge_base.hpp"
#include "sunny/scheduler.hpp"
#include "sunny/scoring.hpp"

namespace sunny {

/// Everything recorded about one solver on one instance: its improving
/// solutions (trails.csv) and how the run ended (runs.csv).
struct SolverTrail {
    std::vector<TrailPoint> points;  // ascending time, strictly improving objective
    std::optional<RunStatus> status;
    double final_time = 0.0;
    std::optional<std::int64_t> final_objective;
};

struct ReplayOutcome {
    AnswerKind kind = AnswerKind::Unknown;
    double time_s = 0.0;
    std::optional<std::int64_t> objective;
    std::vector<TrailPoint> trail;  // pointwise best across cores
};

namespace detail {

/// Objectives recorded anywhere mean an optimization instance; run tables
/// carry no direction, so lower-is-better is the convention throughout.
inline Direction infer_direction(const std::map<std::string, SolverTrail>& trails) {
    for (const auto& [solver, tr] : trails)
        if (!tr.points.empty() || tr.final_objective) return Direction::Min;
    return Direction::None;
}

}  // namespace detail

/// Replays recorded behavior against a core assignment. A slot yields its
/// solver's recorded events shifted to the slot start, but only those that
/// fit before the slot ends; a conclusive recorded status (opt, unsat, or sat
/// on satisfaction instances) counts only if its completion time fits in the
/// slot. No restart simulation: recorded trails cannot say what a solver
/// would have done with a tighter bound.
inline ReplayOutcome replay_schedule(const CoreAssignment& assignment,
                                     const std::map<std::string, SolverTrail>& trails, double t) {
    const std::int64_t t_ms = seconds_to_ms(t);
    const Direction direction = detail::infer_direction(trails);

    struct Completion {
        std::int64_t at_ms;
        AnswerKind kind;
        std::optional<std::int64_t> objective;
        std::string solver;
    };
    std::optional<Completion> best_completion;
    std::vector<std::pair<std::int64_t, std::int64_t>> points;  // (ms, objective)

    for (const auto& timeline : assignment) {
        for (const auto& slot : timeline.slots) {
            auto it = trails.find(slot.solver);
            if (it == trails.end())
                throw Error("replay_schedule: no recorded trail for solver '" + slot.solver + "'");
            const SolverTrail& tr = it->second;
            const std::int64_t span = slot.end_ms - slot.start_ms;

            for (const auto& p : tr.points) {
                const std::int64_t at = seconds_to_ms(p.time_s);
                if (at <= span && slot.start_ms + at <= t_ms)
                    points.emplace_back(slot.start_ms + at, p.objective);
            }

            std::optional<AnswerKind> kind;
            if (tr.status == RunStatus::Optimal) kind = AnswerKind::Optimal;
            else if (tr.status == RunStatus::Unsat) kind = AnswerKind::Unsat;
            else if (tr.status == RunStatus::Sat && direction == Direction::None)
                kind = AnswerKind::Sat;
            if (!kind) continue;
            const std::int64_t at = seconds_to_ms(tr.final_time);
            if (at > span || slot.start_ms + at > t_ms) continue;
            Completion c{slot.start_ms + at, *kind, tr.final_objective, slot.solver};
            auto earlier = [&](const Completion& a, const Completion& b) {
                if (a.at_ms != b.at_ms) return a.at_ms < b.at_ms;
                if (a.kind != b.kind) return a.kind == AnswerKind::Optimal;  // prefer a value
                if (a.objective && b.objective && *a.objective != *b.objective)
                    return *a.objective < *b.objective;
                return a.solver < b.solver;
            };
            if (!best_completion || earlier(c, *best_completion)) best_completion = c;
        }
    }

    ReplayOutcome out;
    const std::int64_t horizon = best_completion ? best_completion->at_ms : t_ms;
    std::sort(points.begin(), points.end());
    std::optional<std::int64_t> best;
    for (const auto& [at, obj] : points) {
        if (at > horizon) break;
        if (!best || obj < *best) {
            best = obj;
            out.trail.push_back({ms_to_seconds(at), obj});
        }
    }

    if (best_completion) {
        out.kind = best_completion->kind;
        out.time_s = ms_to_seconds(best_completion->at_ms);
        out.objective = best_completion->objective;
        return out;
    }
    if (best) {
        out.kind = AnswerKind::Sat;
        out.time_s = t;
        out.objective = best;
        return out;
    }
    out.kind = AnswerKind::Unknown;
    out.time_s = t;
    return out;
}

// ---------------------------------------------------------------------------
// Selector evaluation over a held-out test set
// ---------------------------------------------------------------------------

struct TestInstance {
    std::string id;
    FeatureVector features;
    std::map<std::string, SolverTrail> trails;
};

struct SelectorSummary {
    std::size_t solved = 0;
    double avg_time = 0.0;  // over solved instances
    std::vector<InstanceResult> results;
};

inline constexpr const char* kSelectorId = "sunny";

namespace detail {

inline bool replay_solved(const ReplayOutcome& outcome, Direction direction) {
    if (outcome.kind == AnswerKind::Optimal || outcome.kind == AnswerKind::Unsat) return true;
    return outcome.kind == AnswerKind::Sat && direction == Direction::None;
}

inline InstanceResult to_result(const std::string& instance, const std::string& solver,
                                const ReplayOutcome& outcome, Direction direction) {
    InstanceResult r;
    r.instance = instance;
    r.solver = solver;
    r.kind = outcome.kind;
    r.time = outcome.time_s;
    r.objective = outcome.objective;
    r.direction = direction;
    return r;
}

}  // namespace detail

/// Runs the full selection pipeline (neighbors → stats → schedule →
/// parallelize → replay) on each test instance, and replays every portfolio
/// solver solo on a full window for comparison. The returned results feed
/// borda_score directly.
inline SelectorSummary evaluate_selector(const KnowledgeBase& kb,
                                         const std::vector<TestInstance>& tests, std::size_t k,
                                         double t, int c) {
    for (const auto& test : tests)
        if (kb.instances.count(test.id))
            throw Error("evaluate_selector: test instance '" + test.id +
                        "' overlaps the knowledge base");
    if (kb.solvers.empty()) throw Error("evaluate_selector: knowledge base has no runs");
    k = std::min(k, kb.size());  // k is capped by what the KB can offer
    if (k == 0) throw Error("evaluate_selector: empty knowledge base");

    const std::vector<std::string> portfolio(kb.solvers.begin(), kb.solvers.end());
    const NeighborhoodStats global = solver_stats(kb, {});
    std::string backup = portfolio.front();
    for (const auto& id : portfolio)
        if (global.kb_solved_count(id) > global.kb_solved_count(backup)) backup = id;

    const std::int64_t t_ms = seconds_to_ms(t);
    SelectorSummary summary;
    double time_sum = 0.0;

    for (const auto& test : tests) {
        // Replay precondition: every scheduled solver needs a trail entry,
        // so absent recordings become explicitly empty ones.
        std::map<std::string, SolverTrail> trails = test.trails;
        for (const auto& id : portfolio) trails.try_emplace(id);
        const Direction direction = detail::infer_direction(trails);

        auto nbrs = neighbors(kb, test.features, k);
        auto stats = solver_stats(kb, nbrs);
        auto sigma = sunny_schedule(stats, portfolio, backup, t_ms);
        auto cores = parallelize(sigma, c, t_ms);
        ReplayOutcome outcome = replay_schedule(cores, trails, t);
        summary.results.push_back(detail::to_result(test.id, kSelectorId, outcome, direction));
        if (detail::replay_solved(outcome, direction)) {
            ++summary.solved;
            time_sum += outcome.time_s;
        }

        for (const auto& id : portfolio) {
            CoreAssignment solo{{1, {{id, 0, t_ms}}}};
            ReplayOutcome alone = replay_schedule(solo, trails, t);
            summary.results.push_back(detail::to_result(test.id, id, alone, direction));
        }
    }
    if (summary.solved) summary.avg_time = time_sum / static_cast<double>(summary.solved);
    return summary;
}

// ---------------------------------------------------------------------------
// Test-set files: features.csv (same schema as the KB), runs.csv for final
// statuses, trails.csv for improving solutions:
//   trails.csv header: instance,solver,time,objective
// ---------------------------------------------------------------------------

inline std::vector<TestInstance> load_test_set(const std::string& dir, const std::string& schema) {
    namespace fs = std::filesystem;
    auto features =
        parse_features_csv(read_file((fs::path(dir) / "features.csv").string()), schema);
    auto runs = parse_runs_csv(read_file((fs::path(dir) / "runs.csv").string()));

    std::map<std::string, TestInstance> by_id;
    for (auto& [id, fv] : features) {
        TestInstance t;
        t.id = id;
        t.features = fv;
        by_id.emplace(id, std::move(t));
    }

    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& rec : runs) {
        auto it = by_id.find(rec.instance);
        if (it == by_id.end())
            throw Error("runs.csv references unknown test instance '" + rec.instance + "'");
        if (!seen.emplace(rec.instance, rec.solver).second)
            throw Error("duplicate run for (" + rec.instance + ", " + rec.solver + ")");
        SolverTrail& tr = it->second.trails[rec.solver];
        tr.status = rec.status;
        tr.final_time = rec.time;
        tr.final_objective = rec.objective;
    }

    const auto trails_path = (fs::path(dir) / "trails.csv").string();
    auto lines = to_lines(read_file(trails_path));
    if (lines.empty()) throw ParseError("trails.csv: empty file");
    if (trim(lines[0]) != "instance,solver,time,objective")
        throw ParseError("trails.csv: header must be instance,solver,time,objective", 1);
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        auto fields = split(lines[n], ',');
        if (fields.size() != 4) throw ParseError("trails.csv: expected 4 fields", n + 1);
        std::string instance{trim(fields[0])};
        std::string solver{trim(fields[1])};
        auto it = by_id.find(instance);
        if (it == by_id.end())
            throw ParseError("trails.csv: unknown test instance '" + instance + "'", n + 1);
        TrailPoint p;
        p.time_s = parse_double(fields[2], n + 1);
        if (p.time_s < 0) throw ParseError("trails.csv: negative time", n + 1);
        p.objective = parse_int(fields[3], n + 1);
        it->second.trails[solver].points.push_back(p);
    }

    std::vector<TestInstance> out;
    for (auto& [id, test] : by_id) {
        for (auto& [solver, tr] : test.trails) {
            std::stable_sort(tr.points.begin(), tr.points.end(),
                             [](const TrailPoint& a, const TrailPoint& b) {
                                 return a.time_s < b.time_s;
                             });
            for (std::size_t i = 1; i < tr.points.size(); ++i)
                if (tr.points[i].objective >= tr.points[i - 1].objective)
                    throw Error("trails.csv: (" + id + ", " + solver +
                                ") objectives must strictly improve over time");
        }
        out.push_back(std::move(test));
    }
    return out;
}

}  // namespace sunny
