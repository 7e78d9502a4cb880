#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/features.hpp"
#include "sunny/io.hpp"

namespace sunny {

enum class RunStatus { Sat, Optimal, Unsat, Unknown, Error };

inline std::string run_status_token(RunStatus s) {
    switch (s) {
        case RunStatus::Sat: return "sat";
        case RunStatus::Optimal: return "opt";
        case RunStatus::Unsat: return "unsat";
        case RunStatus::Unknown: return "unk";
        case RunStatus::Error: return "err";
    }
    return "?";
}

inline std::optional<RunStatus> run_status_from_token(std::string_view t) {
    if (t == "sat") return RunStatus::Sat;
    if (t == "opt") return RunStatus::Optimal;
    if (t == "unsat") return RunStatus::Unsat;
    if (t == "unk") return RunStatus::Unknown;
    if (t == "err") return RunStatus::Error;
    return std::nullopt;
}

/// One training observation: how a solver did on an instance within T_train.
struct RunRecord {
    std::string instance;
    std::string solver;
    RunStatus status = RunStatus::Unknown;
    double time = 0.0;                          // seconds, in [0, T_train]
    std::optional<std::int64_t> objective;      // best value found, if any
};

class KnowledgeBase {
public:
    std::string schema;
    double t_train = 0.0;
    // instance -> raw feature vector, and its normalized twin
    std::map<std::string, FeatureVector> instances;
    std::map<std::string, FeatureVector> normalized;
    // instance -> solver -> record
    std::map<std::string, std::map<std::string, RunRecord>> runs;
    std::set<std::string> solvers;
    NormalizationBounds bounds;

    std::size_t dimension() const { return bounds.dimension(); }
    std::size_t size() const { return instances.size(); }

    /// An instance counts as an optimization instance when any recorded run
    /// on it carries an objective value.
    bool is_optimization_instance(const std::string& id) const {
        auto it = runs.find(id);
        if (it == runs.end()) return false;
        for (const auto& [solver, rec] : it->second)
            if (rec.objective) return true;
        return false;
    }

    /// Completion notion used throughout: a satisfaction instance is solved by
    /// a conclusive sat/unsat answer, an optimization instance only by a
    /// proved optimum.
    bool run_solved(const RunRecord& rec) const {
        if (is_optimization_instance(rec.instance))
            return rec.status == RunStatus::Optimal;
        return rec.status == RunStatus::Sat || rec.status == RunStatus::Unsat;
    }

    const RunRecord* find_run(const std::string& instance, const std::string& solver) const {
        auto it = runs.find(instance);
        if (it == runs.end()) return nullptr;
        auto jt = it->second.find(solver);
        return jt == it->second.end() ? nullptr : &jt->second;
    }
};

// ---------------------------------------------------------------------------
// Load / save
//
//   features.csv  header: instance,f1,...,fd
//   runs.csv      header: instance,solver,status,time,objective
//   kb.meta       key=value lines: schema=<id>, timeout=<seconds>
// ---------------------------------------------------------------------------

namespace detail {

inline void finalize_kb(KnowledgeBase& kb) {
    std::vector<FeatureVector> all;
    all.reserve(kb.instances.size());
    for (const auto& [id, fv] : kb.instances) all.push_back(fv);
    kb.bounds = fit_normalization(all);
    for (const auto& [id, fv] : kb.instances) kb.normalized[id] = normalize(fv, kb.bounds);

    if (kb.schema == kBuiltinFeatureSchema && kb.dimension() != kBuiltinFeatureCount)
        throw Error("knowledge base: schema " + kb.schema + " declares " +
                    std::to_string(kBuiltinFeatureCount) + " features, file has " +
                    std::to_string(kb.dimension()));
}

}  // namespace detail

/// Builds a validated KB from already-parsed pieces (the CSV loaders below and
/// `train` both funnel through here).
inline KnowledgeBase make_kb(std::string schema, double t_train,
                             std::map<std::string, FeatureVector> instances,
                             const std::vector<RunRecord>& run_rows) {
    if (instances.empty()) throw Error("knowledge base: no instances");
    if (t_train <= 0) throw Error("knowledge base: timeout must be positive");
    KnowledgeBase kb;
    kb.schema = std::move(schema);
    kb.t_train = t_train;
    kb.instances = std::move(instances);
    for (const auto& rec : run_rows) {
        if (!kb.instances.count(rec.instance))
            throw Error("runs reference undeclared instance '" + rec.instance + "'");
        if (rec.time < 0 || rec.time > kb.t_train)
            throw Error("run (" + rec.instance + ", " + rec.solver + "): time " +
                        format_double(rec.time) + " outside [0, " + format_double(kb.t_train) + "]");
        if (rec.objective && rec.status != RunStatus::Sat && rec.status != RunStatus::Optimal)
            throw Error("run (" + rec.instance + ", " + rec.solver +
                        "): objective only allowed with sat/opt status");
        if (!kb.runs[rec.instance].emplace(rec.solver, rec).second)
            throw Error("duplicate run for (" + rec.instance + ", " + rec.solver + ")");
        kb.solvers.insert(rec.solver);
    }
    detail::finalize_kb(kb);
    return kb;
}

inline std::map<std::string, FeatureVector> parse_features_csv(const std::string& text,
                                                               const std::string& schema) {
    auto lines = to_lines(text);
    if (lines.empty()) throw ParseError("features.csv: empty file");
    auto header = split(lines[0], ',');
    if (header.size() < 2 || trim(header[0]) != "instance")
        throw ParseError("features.csv: header must be instance,f1,...,fd", 1);
    const std::size_t d = header.size() - 1;

    std::map<std::string, FeatureVector> out;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        auto fields = split(lines[n], ',');
        if (fields.size() != d + 1)
            throw ParseError("features.csv: expected " + std::to_string(d + 1) + " fields", n + 1);
        std::string id{trim(fields[0])};
        if (!is_identifier(id)) throw ParseError("features.csv: bad instance id '" + id + "'", n + 1);
        FeatureVector fv;
        fv.schema = schema;
        for (std::size_t j = 1; j < fields.size(); ++j) {
            double v = parse_double(fields[j], n + 1);
            if (!std::isfinite(v)) throw ParseError("features.csv: non-finite feature", n + 1);
            fv.values.push_back(v);
        }
        if (!out.emplace(id, std::move(fv)).second)
            throw ParseError("features.csv: duplicate instance '" + id + "'", n + 1);
    }
    if (out.empty()) throw ParseError("features.csv: no instances");
    return out;
}

inline std::vector<RunRecord> parse_runs_csv(const std::string& text) {
    auto lines = to_lines(text);
    if (lines.empty()) throw ParseError("runs.csv: empty file");
    if (trim(lines[0]) != "instance,solver,status,time,objective")
        throw ParseError("runs.csv: header must be instance,solver,status,time,objective", 1);

    std::vector<RunRecord> out;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        auto fields = split(lines[n], ',');
        if (fields.size() != 5) throw ParseError("runs.csv: expected 5 fields", n + 1);
        RunRecord rec;
        rec.instance = trim(fields[0]);
        rec.solver = trim(fields[1]);
        if (!is_identifier(rec.instance) || !is_identifier(rec.solver))
            throw ParseError("runs.csv: bad instance/solver id", n + 1);
        auto status = run_status_from_token(trim(fields[2]));
        if (!status) throw ParseError("runs.csv: bad status '" + std::string(trim(fields[2])) + "'", n + 1);
        rec.status = *status;
        rec.time = parse_double(fields[3], n + 1);
        if (!trim(fields[4]).empty()) rec.objective = parse_int(fields[4], n + 1);
        out.push_back(std::move(rec));
    }
    return out;
}

inline KnowledgeBase load_kb(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto meta_path = (fs::path(dir) / "kb.meta").string();
    std::string schema;
    double t_train = -1;
    auto meta_lines = to_lines(read_file(meta_path));
    for (std::size_t n = 0; n < meta_lines.size(); ++n) {
        auto line = trim(meta_lines[n]);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("kb.meta: expected key=value", n + 1);
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key == "schema") schema = std::string(value);
        else if (key == "timeout") t_train = parse_double(value, n + 1);
        else throw ParseError("kb.meta: unknown key '" + std::string(key) + "'", n + 1);
    }
    if (schema.empty()) throw Error(meta_path + ": missing schema");
    if (t_train <= 0) throw Error(meta_path + ": missing or non-positive timeout");

    auto instances =
        parse_features_csv(read_file((fs::path(dir) / "features.csv").string()), schema);
    auto run_rows = parse_runs_csv(read_file((fs::path(dir) / "runs.csv").string()));
    return make_kb(schema, t_train, std::move(instances), run_rows);
}

inline void save_kb(const KnowledgeBase& kb, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::ostringstream meta;
    meta << "schema=" << kb.schema << '\n' << "timeout=" << format_double(kb.t_train) << '\n';
    write_file((fs::path(dir) / "kb.meta").string(), meta.str());

    std::ostringstream feat;
    feat << "instance";
    for (std::size_t j = 1; j <= kb.dimension(); ++j) feat << ",f" << j;
    feat << '\n';
    for (const auto& [id, fv] : kb.instances) {
        feat << id;
        for (double v : fv.values) feat << ',' << format_double(v);
        feat << '\n';
    }
    write_file((fs::path(dir) / "features.csv").string(), feat.str());

    std::ostringstream rs;
    rs << "instance,solver,status,time,objective\n";
    for (const auto& [instance, by_solver] : kb.runs) {
        for (const auto& [solver, rec] : by_solver) {
            rs << instance << ',' << solver << ',' << run_status_token(rec.status) << ','
               << format_double(rec.time) << ',';
            if (rec.objective) rs << *rec.objective;
            rs << '\n';
        }
    }
    write_file((fs::path(dir) / "runs.csv").string(), rs.str());
}

// ---------------------------------------------------------------------------
// k-NN queries and neighborhood statistics
// ---------------------------------------------------------------------------

/// The k stored instances with smallest normalized Euclidean distance to the
/// query, ascending; exact distance ties break by instance id.
inline std::vector<std::string> neighbors(const KnowledgeBase& kb, const FeatureVector& query,
                                          std::size_t k) {
    if (k == 0 || k > kb.size())
        throw Error("neighbors: k=" + std::to_string(k) + " outside [1, " +
                    std::to_string(kb.size()) + "]");
    const FeatureVector q = normalize(query, kb.bounds);
    std::vector<std::pair<double, std::string>> dist;
    dist.reserve(kb.size());
    for (const auto& [id, fv] : kb.normalized) dist.emplace_back(distance(q, fv), id);
    std::sort(dist.begin(), dist.end());
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
    return out;
}

struct SolverPerf {
    std::size_t solved = 0;
    double avg_time = 0.0;  // over solved instances; T_train when none solved
    double quality = 0.0;   // mean over the neighborhood, in [0, 1]
    std::set<std::string> solved_instances;
};

/// Per-solver aggregates over one neighborhood, plus the whole-KB solved
/// counts the scheduler uses to designate the backup solver.
struct NeighborhoodStats {
    std::vector<std::string> instances;
    double t_train = 0.0;
    std::map<std::string, SolverPerf> per_solver;
    std::map<std::string, std::size_t> kb_solved;

    /// A solver with no recorded runs behaves as if every run were unknown at
    /// T_train.
    SolverPerf perf(const std::string& solver) const {
        auto it = per_solver.find(solver);
        if (it != per_solver.end()) return it->second;
        SolverPerf none;
        none.avg_time = t_train;
        return none;
    }

    std::size_t kb_solved_count(const std::string& solver) const {
        auto it = kb_solved.find(solver);
        return it == kb_solved.end() ? 0 : it->second;
    }
};

namespace detail {

/// Solution-quality stand-in for one optimization instance: linear rescaling
/// of the solver's best objective between the neighborhood's worst (0) and
/// best (1) values, under the lower-is-better convention used by the run
/// tables. No objective, no credit.
inline double instance_quality(const KnowledgeBase& kb, const std::string& instance,
                               const std::string& solver) {
    auto it = kb.runs.find(instance);
    if (it == kb.runs.end()) return 0.0;
    std::optional<std::int64_t> mine;
    std::optional<std::int64_t> best, worst;
    for (const auto& [s, rec] : it->second) {
        if (!rec.objective) continue;
        if (s == solver) mine = rec.objective;
        best = best ? std::min(*best, *rec.objective) : *rec.objective;
        worst = worst ? std::max(*worst, *rec.objective) : *rec.objective;
    }
    if (!mine) return 0.0;
    if (*worst == *best) return 1.0;
    return static_cast<double>(*worst - *mine) / static_cast<double>(*worst - *best);
}

}  // namespace detail

inline NeighborhoodStats solver_stats(const KnowledgeBase& kb,
                                      const std::vector<std::string>& neighborhood) {
    NeighborhoodStats stats;
    stats.instances = neighborhood;
    stats.t_train = kb.t_train;

    std::set<std::string> seen;
    for (const auto& id : neighborhood) {
        if (!kb.instances.count(id)) throw Error("solver_stats: unknown instance '" + id + "'");
        if (!seen.insert(id).second) throw Error("solver_stats: repeated instance '" + id + "'");
    }

    for (const auto& solver : kb.solvers) {
        SolverPerf perf;
        double time_sum = 0.0;
        double quality_sum = 0.0;
        for (const auto& id : neighborhood) {
            if (const RunRecord* rec = kb.find_run(id, solver); rec && kb.run_solved(*rec)) {
                perf.solved += 1;
                perf.solved_instances.insert(id);
                time_sum += rec->time;
            }
            quality_sum += detail::instance_quality(kb, id, solver);
        }
        perf.avg_time = perf.solved ? time_sum / static_cast<double>(perf.solved) : kb.t_train;
        perf.quality = neighborhood.empty() ? 0.0
                                            : quality_sum / static_cast<double>(neighborhood.size());
        stats.per_solver.emplace(solver, std::move(perf));

        std::size_t total = 0;
        for (const auto& [id, by_solver] : kb.runs) {
            auto jt = by_solver.find(solver);
            if (jt != by_solver.end() && kb.run_solved(jt->second)) ++total;
        }
        stats.kb_solved[solver] = total;
    }
    return stats;
}

}  // namespace sunny
