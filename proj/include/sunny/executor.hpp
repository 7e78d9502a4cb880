#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sunny/config.hpp"
#include "sunny/errors.hpp"
#include "sunny/io.hpp"
#include "sunny/mock_script.hpp"
#include "sunny/problem.hpp"
#include "sunny/process.hpp"
#include "sunny/protocol.hpp"
#include "sunny/scheduler.hpp"

namespace sunny {

inline constexpr std::int64_t kPollTickMs = 100;
inline constexpr std::int64_t kKillGraceMs = 1000;

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

enum class EventType { Launch, Solution, Bound, Restart, Kill, Complete, Unsat, CheckFail, Error };

inline std::string event_type_token(EventType e) {
    switch (e) {
        case EventType::Launch: return "LAUNCH";
        case EventType::Solution: return "SOLUTION";
        case EventType::Bound: return "BOUND";
        case EventType::Restart: return "RESTART";
        case EventType::Kill: return "KILL";
        case EventType::Complete: return "COMPLETE";
        case EventType::Unsat: return "UNSAT";
        case EventType::CheckFail: return "CHECK_FAIL";
        case EventType::Error: return "ERROR";
    }
    return "?";
}

inline std::optional<EventType> event_type_from_token(std::string_view t) {
    if (t == "LAUNCH") return EventType::Launch;
    if (t == "SOLUTION") return EventType::Solution;
    if (t == "BOUND") return EventType::Bound;
    if (t == "RESTART") return EventType::Restart;
    if (t == "KILL") return EventType::Kill;
    if (t == "COMPLETE") return EventType::Complete;
    if (t == "UNSAT") return EventType::Unsat;
    if (t == "CHECK_FAIL") return EventType::CheckFail;
    if (t == "ERROR") return EventType::Error;
    return std::nullopt;
}

struct LogEvent {
    std::int64_t t_ms = 0;
    int core = 0;
    std::string solver;
    EventType type = EventType::Launch;
    std::string detail;
};

/// Append-only run record; its rendered form is the single source of truth
/// for what happened when.
struct EventLog {
    std::vector<LogEvent> events;

    void log(std::int64_t t_ms, int core, const std::string& solver, EventType type,
             std::string detail = {}) {
        events.push_back({t_ms, core, solver, type, std::move(detail)});
    }

    /// One line per event: t=<ms> core=<n> solver=<id> event=<TYPE> [detail]
    std::string render() const {
        std::ostringstream os;
        for (const auto& e : events) {
            os << "t=" << e.t_ms << " core=" << e.core << " solver=" << e.solver
               << " event=" << event_type_token(e.type);
            if (!e.detail.empty()) os << ' ' << e.detail;
            os << '\n';
        }
        return os.str();
    }
};

inline std::vector<LogEvent> parse_event_log(const std::string& text) {
    std::vector<LogEvent> events;
    auto lines = to_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        auto line = trim(lines[n]);
        if (line.empty()) continue;
        auto tokens = split_ws(line);
        if (tokens.size() < 4 || !tokens[0].starts_with("t=") || !tokens[1].starts_with("core=") ||
            !tokens[2].starts_with("solver=") || !tokens[3].starts_with("event="))
            throw ParseError("bad event line", n + 1);
        LogEvent e;
        e.t_ms = parse_int(tokens[0].substr(2), n + 1);
        e.core = static_cast<int>(parse_int(tokens[1].substr(5), n + 1));
        e.solver = std::string(tokens[2].substr(7));
        auto type = event_type_from_token(tokens[3].substr(6));
        if (!type) throw ParseError("bad event type", n + 1);
        e.type = *type;
        for (std::size_t i = 4; i < tokens.size(); ++i) {
            if (!e.detail.empty()) e.detail += ' ';
            e.detail += std::string(tokens[i]);
        }
        events.push_back(std::move(e));
    }
    return events;
}

// ---------------------------------------------------------------------------
// Supervisor-side state
// ---------------------------------------------------------------------------

/// Best objective seen so far across all workers. Updates must strictly
/// improve; owner is the first solver to reach the value.
struct BestBoundRegister {
    std::optional<std::int64_t> best;
    std::string owner;
    ObjectiveKind direction = ObjectiveKind::Minimize;

    bool would_improve(std::int64_t v) const {
        if (!best) return true;
        return direction == ObjectiveKind::Maximize ? v > *best : v < *best;
    }
    /// True when v is strictly worse than the current best.
    bool is_worse(std::int64_t v) const {
        if (!best) return false;
        return direction == ObjectiveKind::Maximize ? v < *best : v > *best;
    }
    bool update(std::int64_t v, const std::string& solver) {
        if (!would_improve(v)) return false;
        best = v;
        owner = solver;
        return true;
    }
};

/// What the supervisor knows about one core's current run.
struct WorkerState {
    int core = 0;
    std::string solver;
    std::int64_t run_start_ms = 0;
    /// Staleness anchor: the latest of run start, the worker's own last
    /// solution, and the last global register movement it has observed. A
    /// register update resets every worker's anchor — the point of the
    /// restart threshold is to give a solver T_r of quiet time to catch up
    /// with news before being recycled.
    std::int64_t last_progress_ms = 0;
    /// Best objective this run is known to hold: its own accepted solutions,
    /// or the bound it was (re)launched with.
    std::optional<std::int64_t> best_objective;
    int restart_count = 0;
};

enum class RestartVerdict { Continue, Restart };

struct RestartDecision {
    RestartVerdict verdict = RestartVerdict::Continue;
    std::int64_t bound = 0;  // register best at decision time (Restart only)
};

/// Bound-and-restart rule. Under the default `all` policy a worker restarts
/// only when BOTH hold: (i) it has been silent for at least T_r, and (ii) its
/// best bound is absent or strictly worse than the register's. The `any`
/// policy is the disjunctive reading of the same two conditions. Either way a
/// restart needs a register value to inject.
inline RestartDecision restart_decision(const WorkerState& w, const BestBoundRegister& reg,
                                        std::int64_t t_r_ms, std::int64_t now_ms,
                                        RestartPolicy policy = RestartPolicy::All) {
    if (!reg.best) return {RestartVerdict::Continue, 0};
    const bool silent = now_ms - w.last_progress_ms >= t_r_ms;
    const bool obsolete = !w.best_objective || reg.is_worse(*w.best_objective);
    const bool fire = policy == RestartPolicy::All ? (silent && obsolete) : (silent || obsolete);
    if (!fire) return {RestartVerdict::Continue, 0};
    return {RestartVerdict::Restart, *reg.best};
}

enum class RecordVerdict { Accepted, RejectedNotImproving, RejectedInvalid };

struct RecordOutcome {
    RecordVerdict verdict = RecordVerdict::RejectedInvalid;
    std::optional<std::int64_t> objective;  // orchestrator-computed
    CheckResult check;
};

/// Admits one solution into the register. Checked solvers must pass the full
/// checker; every solver must at least yield a computable objective on
/// optimization problems (the orchestrator never believes printed objective
/// values). The register moves only on strict improvement.
inline RecordOutcome record_solution(BestBoundRegister& reg, const std::string& solver,
                                     const Assignment& assignment, const ProblemDescriptor& problem,
                                     bool check_required) {
    RecordOutcome out;
    if (check_required) {
        out.check = check_solution(problem, assignment);
        if (!out.check.valid()) {
            out.verdict = RecordVerdict::RejectedInvalid;
            return out;
        }
    }
    if (!problem.is_optimization()) {
        out.verdict = RecordVerdict::Accepted;
        return out;
    }
    for (const auto& term : problem.objective.expr.terms) {
        if (!assignment.count(term.var)) {
            out.check = CheckResult{CheckResult::Verdict::Incomplete, 0, term.var};
            out.verdict = RecordVerdict::RejectedInvalid;
            return out;
        }
    }
    const std::int64_t obj = evaluate_objective(problem, assignment);
    out.objective = obj;
    out.verdict = reg.update(obj, solver) ? RecordVerdict::Accepted
                                          : RecordVerdict::RejectedNotImproving;
    return out;
}

// ---------------------------------------------------------------------------
// Workers and clocks
// ---------------------------------------------------------------------------

/// What the supervisor needs from a worker: start it, collect its lines,
/// stop it. Real subprocesses and scripted in-process simulations implement
/// the same contract, so the supervisor logic cannot diverge between modes.
class WorkerIO {
public:
    virtual ~WorkerIO() = default;
    virtual bool launch(const std::vector<std::string>& argv, std::int64_t now_ms,
                        std::string* error) = 0;
    virtual std::vector<std::string> drain(std::int64_t now_ms) = 0;
    virtual void kill(std::int64_t now_ms) = 0;
    virtual void tick(std::int64_t /*now_ms*/) {}  // periodic housekeeping
    virtual void shutdown() {}                 // end-of-run cleanup, may block briefly
};

/// Virtual-clock worker: interprets the mock script named by --script in the
/// launch argv, releasing its protocol lines as the virtual time passes their
/// AT marks. Guards see the launch argv's --bound just as the real mock does.
class SimWorker : public WorkerIO {
public:
    bool launch(const std::vector<std::string>& argv, std::int64_t now_ms,
                std::string* error) override {
        auto script_path = find_flag_value(argv, "--script");
        if (!script_path) {
            if (error) *error = "virtual clock requires --script in the solver command";
            return false;
        }
        MockScript script;
        try {
            auto it = cache_.find(*script_path);
            if (it == cache_.end())
                it = cache_.emplace(*script_path, load_mock_script(*script_path)).first;
            script = it->second;
        } catch (const Error& e) {
            if (error) *error = e.what();
            return false;
        }
        std::optional<std::int64_t> bound;
        if (auto b = find_flag_value(argv, "--bound")) {
            auto v = try_parse_int(*b);
            if (!v) {
                if (error) *error = "bad --bound value '" + *b + "'";
                return false;
            }
            bound = *v;
        }
        pending_ = enabled_actions(script, bound);
        next_ = 0;
        started_ = now_ms;
        running_ = true;
        return true;
    }

    std::vector<std::string> drain(std::int64_t now_ms) override {
        std::vector<std::string> lines;
        if (!running_) return lines;
        while (next_ < pending_.size() &&
               started_ + seconds_to_ms(pending_[next_].at_seconds) <= now_ms) {
            auto rendered = render_action(pending_[next_]);
            lines.insert(lines.end(), rendered.begin(), rendered.end());
            ++next_;
        }
        return lines;
    }

    void kill(std::int64_t) override { running_ = false; }

private:
    std::map<std::string, MockScript> cache_;
    MockScript pending_;
    std::size_t next_ = 0;
    std::int64_t started_ = 0;
    bool running_ = false;
};

/// Real-process worker: spawns the command, reads its stdout without
/// blocking, and escalates SIGTERM to SIGKILL after the grace period.
class ProcessWorker : public WorkerIO {
public:
    bool launch(const std::vector<std::string>& argv, std::int64_t now_ms,
                std::string* error) override {
        kill(now_ms);  // retire any previous run first
        current_ = std::make_unique<ChildProcess>();
        if (!current_->spawn(argv, error)) {
            current_.reset();
            return false;
        }
        return true;
    }

    std::vector<std::string> drain(std::int64_t) override {
        if (!current_) return {};
        return current_->read_lines();
    }

    void kill(std::int64_t now_ms) override {
        if (!current_) return;
        current_->close_output();
        current_->terminate();
        dying_.push_back({std::move(current_), now_ms});
    }

    void tick(std::int64_t now_ms) override {
        std::erase_if(dying_, [&](Dying& d) {
            if (d.proc->exited()) return true;
            if (now_ms - d.term_at_ms >= kKillGraceMs) {
                d.proc->kill_now();
                return true;
            }
            return false;
        });
    }

    void shutdown() override {
        if (current_) {
            current_->close_output();
            current_->terminate();
            dying_.push_back({std::move(current_), 0});
        }
        for (int i = 0; i < 20 && !dying_.empty(); ++i) {
            std::erase_if(dying_, [](Dying& d) { return d.proc->exited(); });
            if (!dying_.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        for (auto& d : dying_) d.proc->kill_now();
        dying_.clear();
    }

private:
    struct Dying {
        std::unique_ptr<ChildProcess> proc;
        std::int64_t term_at_ms = 0;
    };
    std::unique_ptr<ChildProcess> current_;
    std::vector<Dying> dying_;
};

class Clock {
public:
    virtual ~Clock() = default;
    /// Blocks (real) or teleports (virtual) until the given run time.
    virtual void wait_until(std::int64_t t_ms) = 0;
};

class VirtualClock : public Clock {
public:
    void wait_until(std::int64_t) override {}
};

class RealClock : public Clock {
public:
    RealClock() : start_(std::chrono::steady_clock::now()) {}
    void wait_until(std::int64_t t_ms) override {
        std::this_thread::sleep_until(start_ + std::chrono::milliseconds(t_ms));
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Final answer
// ---------------------------------------------------------------------------

enum class AnswerStatus { Optimal, Sat, Unsat, Unknown, Error, Wrong };

inline std::string answer_status_token(AnswerStatus s) {
    switch (s) {
        case AnswerStatus::Optimal: return "OPTIMAL";
        case AnswerStatus::Sat: return "SAT";
        case AnswerStatus::Unsat: return "UNSAT";
        case AnswerStatus::Unknown: return "UNKNOWN";
        case AnswerStatus::Error: return "ERROR";
        case AnswerStatus::Wrong: return "WRONG";
    }
    return "?";
}

struct TrailPoint {
    double time_s = 0.0;
    std::int64_t objective = 0;
};

struct SolverAnswer {
    AnswerStatus status = AnswerStatus::Unknown;
    std::optional<Assignment> assignment;
    std::optional<std::int64_t> objective;
    double time_s = 0.0;
    std::vector<TrailPoint> trail;  // register improvements over the run
};

struct RunResult {
    SolverAnswer answer;
    EventLog log;
    std::vector<std::string> warnings;  // protocol noise, per solver
};

/// Substitutes the launch placeholders. {problem} becomes the problem path;
/// tokens containing {bound} get the strict-improvement cap, or are dropped
/// entirely when no bound is being injected.
inline std::vector<std::string> instantiate_command(const SolverSpec& spec,
                                                    const std::string& problem_path,
                                                    const std::optional<std::int64_t>& cap) {
    auto substitute = [](std::string text, std::string_view key, const std::string& value) {
        for (std::size_t at = text.find(key); at != std::string::npos;
             at = text.find(key, at + value.size()))
            text.replace(at, key.size(), value);
        return text;
    };
    const std::string cap_text = std::to_string(cap.value_or(0));
    std::vector<std::string> argv;
    for (const auto& token : spec.command) {
        std::string t = token;
        if (t.find("{bound}") != std::string::npos) {
            if (!cap) continue;
            t = substitute(std::move(t), "{bound}", cap_text);
        }
        argv.push_back(substitute(std::move(t), "{problem}", problem_path));
    }
    return argv;
}

// ---------------------------------------------------------------------------
// The supervisor
// ---------------------------------------------------------------------------

namespace detail {

class PortfolioRunner {
public:
    PortfolioRunner(const ProblemDescriptor& problem, const CoreAssignment& assignment,
                    const std::map<std::string, SolverSpec>& specs, const ExecConfig& cfg)
        : problem_(problem), specs_(specs), cfg_(cfg) {
        t_ms_ = seconds_to_ms(cfg.timeout);
        tr_ms_ = seconds_to_ms(cfg.restart_threshold);
        reg_.direction = problem.objective.kind == ObjectiveKind::Maximize
                             ? ObjectiveKind::Maximize
                             : ObjectiveKind::Minimize;
        for (const auto& timeline : assignment) {
            for (const auto& slot : timeline.slots)
                if (!specs_.count(slot.solver))
                    throw Error("run_portfolio: no spec for solver '" + slot.solver + "'");
            CoreRun run;
            run.timeline = timeline;
            run.io = cfg.virtual_clock ? std::unique_ptr<WorkerIO>(std::make_unique<SimWorker>())
                                       : std::unique_ptr<WorkerIO>(std::make_unique<ProcessWorker>());
            cores_.push_back(std::move(run));
        }
        clock_ = cfg.virtual_clock ? std::unique_ptr<Clock>(std::make_unique<VirtualClock>())
                                   : std::unique_ptr<Clock>(std::make_unique<RealClock>());
    }

    RunResult run() {
        for (auto& core : cores_) launch_slot(core, 0);

        std::int64_t now = 0;
        while (!stopped_ && now < t_ms_) {
            if (nobody_left()) break;
            now = std::min(now + kPollTickMs, t_ms_);
            clock_->wait_until(now);
            for (auto& core : cores_) core.io->tick(now);
            drain_all(now);
            if (stopped_ || now >= t_ms_) break;
            slot_boundaries(now);
            if (stopped_) break;
            restart_checks(now);
        }

        const std::int64_t end = stopped_ ? stop_t_ : now;
        for (auto& core : cores_) {
            if (core.live) {
                log_.log(end, core.timeline.core, core.state.solver, EventType::Kill);
                core.io->kill(end);
                core.live = false;
            }
            collect_warnings(core);
            core.io->shutdown();
        }
        RunResult result;
        result.answer = finalize(end);
        result.log = std::move(log_);
        result.warnings = std::move(warnings_);
        return result;
    }

private:
    enum class StopKind { None, Sat, Unsat, Optimal };

    struct CoreRun {
        CoreTimeline timeline;
        std::size_t slot = 0;
        std::unique_ptr<WorkerIO> io;
        OutputParser parser;
        WorkerState state;
        bool live = false;
        bool ever_launched = false;
    };

    struct AcceptedSolution {
        Assignment assignment;
        std::optional<std::int64_t> objective;
        std::int64_t t_ms = 0;
        std::string solver;
    };

    bool nobody_left() const {
        for (const auto& core : cores_) {
            if (core.live) return false;
            if (core.slot + 1 < core.timeline.slots.size()) return false;
        }
        return true;
    }

    void collect_warnings(CoreRun& core) {
        for (const auto& w : core.parser.warnings())
            warnings_.push_back(core.state.solver + ": " + w);
    }

    void launch_slot(CoreRun& core, std::int64_t now) {
        const auto& slot = core.timeline.slots[core.slot];
        const SolverSpec& spec = specs_.at(slot.solver);

        std::optional<std::int64_t> cap;
        std::string problem_path = cfg_.problem_path;
        std::string detail;
        if (problem_.is_optimization() && reg_.best) {
            cap = improvement_cap(problem_, *reg_.best);
            detail = "bound=" + std::to_string(*reg_.best);
            if (count_occurrences(spec.command, "{bound}") == 0) {
                // No placeholder: hand over a bound-tightened problem file.
                ProblemDescriptor tightened = tighten_bound(problem_, *reg_.best);
                problem_path = (std::filesystem::path(scratch_.path()) /
                                (slot.solver + "-" + std::to_string(launch_seq_++) + ".mpd"))
                                   .string();
                write_file(problem_path, serialize_problem(tightened));
                cap.reset();  // the file carries the bound; nothing to substitute
            }
        }

        collect_warnings(core);
        core.parser = OutputParser{};
        core.state = WorkerState{core.timeline.core, slot.solver, now, now,
                                 reg_.best, core.state.solver == slot.solver
                                                ? core.state.restart_count
                                                : 0};
        solver_core_[slot.solver] = core.timeline.core;

        std::string error;
        auto argv = instantiate_command(spec, problem_path, cap);
        if (!core.io->launch(argv, now, &error)) {
            log_.log(now, core.timeline.core, slot.solver, EventType::Error, "spawn");
            warnings_.push_back(slot.solver + ": " + error);
            core.live = false;
            return;
        }
        core.live = true;
        core.ever_launched = true;
        log_.log(now, core.timeline.core, slot.solver, EventType::Launch, detail);
    }

    void drain_all(std::int64_t now) {
        for (auto& core : cores_) {
            if (!core.live) continue;
            for (const auto& line : core.io->drain(now)) {
                for (const auto& event : core.parser.feed_line(line)) {
                    handle_event(core, event, now);
                    if (stopped_) return;
                }
            }
        }
    }

    void handle_event(CoreRun& core, const OutputEvent& event, std::int64_t now) {
        const int core_no = core.timeline.core;
        const std::string solver = core.state.solver;
        const SolverSpec& spec = specs_.at(solver);

        if (std::holds_alternative<ProtocolErrorEvent>(event)) {
            warnings_.push_back(solver + ": " + std::get<ProtocolErrorEvent>(event).message);
            return;
        }

        if (const auto* sol = std::get_if<SolutionEvent>(&event)) {
            RecordOutcome out =
                record_solution(reg_, solver, sol->assignment, problem_, spec.check);
            if (out.verdict == RecordVerdict::RejectedInvalid) {
                log_.log(now, core_no, solver, EventType::CheckFail, out.check.describe());
                distrusted_.insert(solver);
                return;
            }
            core.state.last_progress_ms = now;
            if (!problem_.is_optimization()) {
                log_.log(now, core_no, solver, EventType::Solution);
                history_.push_back({sol->assignment, std::nullopt, now, solver});
                stop(StopKind::Sat, solver, now);
                return;
            }
            const std::int64_t obj = *out.objective;
            log_.log(now, core_no, solver, EventType::Solution, "obj=" + std::to_string(obj));
            if (!core.state.best_objective || better(obj, *core.state.best_objective))
                core.state.best_objective = obj;
            auto& own = solver_best_[solver];
            if (!own || better(obj, *own)) own = obj;
            history_.push_back({sol->assignment, obj, now, solver});
            if (out.verdict == RecordVerdict::Accepted) {
                log_.log(now, core_no, solver, EventType::Bound, "obj=" + std::to_string(obj));
                trail_.push_back({ms_to_seconds(now), obj});
                for (auto& other : cores_)
                    if (other.live) other.state.last_progress_ms = now;
                contradict_claims(obj, now);
            }
            return;
        }

        if (std::holds_alternative<UnsatEvent>(event)) {
            handle_claim(core, now, /*unsat=*/true);
            return;
        }
        if (std::holds_alternative<CompleteEvent>(event)) {
            handle_claim(core, now, /*unsat=*/false);
            return;
        }
    }

    /// Shared handling for the two completion claims. A bare COMPLETE (no
    /// valid solution to its name) asserts exactly what UNSAT does.
    void handle_claim(CoreRun& core, std::int64_t now, bool unsat) {
        const int core_no = core.timeline.core;
        const std::string solver = core.state.solver;
        const SolverSpec& spec = specs_.at(solver);
        const EventType claim_event = unsat ? EventType::Unsat : EventType::Complete;
        const char* wrong_tag = unsat ? "wrong:unsat" : "wrong:complete";

        if (distrusted_.count(solver)) {
            log_.log(now, core_no, solver, claim_event);
            log_.log(now, core_no, solver, EventType::CheckFail, wrong_tag);
            return;
        }

        std::optional<std::int64_t> claimed;
        if (!unsat && problem_.is_optimization()) {
            auto it = solver_best_.find(solver);
            if (it != solver_best_.end()) claimed = it->second;
        }

        if (!claimed) {
            // Claims there is no solution (or none better than nothing).
            if (!history_.empty() || reg_.best) {
                log_.log(now, core_no, solver, claim_event);
                log_.log(now, core_no, solver, EventType::CheckFail, wrong_tag);
                return;
            }
            if (!spec.reliable_completion) {
                log_.log(now, core_no, solver, claim_event, "untrusted");
                pending_unsat_.insert(solver);
                return;
            }
            log_.log(now, core_no, solver, claim_event);
            stop(StopKind::Unsat, solver, now);
            return;
        }

        // Claims its own best is optimal.
        if (reg_.is_worse(*claimed)) {
            log_.log(now, core_no, solver, claim_event);
            log_.log(now, core_no, solver, EventType::CheckFail, wrong_tag);
            return;
        }
        if (!spec.reliable_completion) {
            log_.log(now, core_no, solver, claim_event, "untrusted");
            pending_complete_[solver] = *claimed;
            return;
        }
        log_.log(now, core_no, solver, claim_event);
        claimed_optimal_ = *claimed;
        stop(StopKind::Optimal, solver, now);
    }

    /// A freshly accepted solution disproves every pending no-solution claim,
    /// and every pending optimality claim for a now-beaten value.
    void contradict_claims(std::int64_t new_best, std::int64_t now) {
        for (const auto& solver : pending_unsat_) {
            log_.log(now, core_of(solver), solver, EventType::CheckFail, "wrong:unsat");
        }
        pending_unsat_.clear();
        for (auto it = pending_complete_.begin(); it != pending_complete_.end();) {
            if (better(new_best, it->second)) {
                log_.log(now, core_of(it->first), it->first, EventType::CheckFail,
                         "wrong:complete");
                it = pending_complete_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void slot_boundaries(std::int64_t now) {
        for (auto& core : cores_) {
            while (core.slot + 1 < core.timeline.slots.size() &&
                   core.timeline.slots[core.slot].end_ms <= now) {
                if (core.live) {
                    // Give the outgoing solver one last read: output produced
                    // before the kill still counts.
                    for (const auto& line : core.io->drain(now))
                        for (const auto& event : core.parser.feed_line(line)) {
                            handle_event(core, event, now);
                            if (stopped_) return;
                        }
                    log_.log(now, core.timeline.core, core.state.solver, EventType::Kill);
                    core.io->kill(now);
                    core.live = false;
                }
                ++core.slot;
                launch_slot(core, now);
            }
        }
    }

    void restart_checks(std::int64_t now) {
        if (!problem_.is_optimization()) return;
        for (auto& core : cores_) {
            if (!core.live) continue;
            auto decision =
                restart_decision(core.state, reg_, tr_ms_, now, cfg_.restart_policy);
            if (decision.verdict != RestartVerdict::Restart) continue;
            log_.log(now, core.timeline.core, core.state.solver, EventType::Restart,
                     "bound=" + std::to_string(decision.bound));
            core.io->kill(now);  // physical stop; semantically one RESTART, not kill+launch
            core.live = false;
            const int restarts = core.state.restart_count + 1;
            launch_slot(core, now);
            core.state.restart_count = restarts;
        }
    }

    void stop(StopKind kind, const std::string& solver, std::int64_t now) {
        stopped_ = true;
        stop_kind_ = kind;
        stop_solver_ = solver;
        stop_t_ = now;
    }

    bool better(std::int64_t a, std::int64_t b) const {
        return reg_.direction == ObjectiveKind::Maximize ? a > b : a < b;
    }

    int core_of(const std::string& solver) const {
        auto it = solver_core_.find(solver);
        return it == solver_core_.end() ? 0 : it->second;
    }

    /// Best-first order over recorded solutions for the final re-check walk.
    std::vector<const AcceptedSolution*> ranked_history() const {
        std::vector<const AcceptedSolution*> ranked;
        ranked.reserve(history_.size());
        for (const auto& h : history_) ranked.push_back(&h);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](const AcceptedSolution* a, const AcceptedSolution* b) {
                             if (a->objective && b->objective && *a->objective != *b->objective)
                                 return better(*a->objective, *b->objective);
                             return a->t_ms < b->t_ms;
                         });
        return ranked;
    }

    /// The winning assignment is re-checked unconditionally; an answer that
    /// cannot survive its own checker is never emitted.
    SolverAnswer finalize(std::int64_t end_ms) {
        SolverAnswer answer;
        answer.trail = trail_;
        answer.time_s = ms_to_seconds(end_ms);

        if (stop_kind_ == StopKind::Unsat) {
            answer.status = AnswerStatus::Unsat;
            answer.time_s = ms_to_seconds(stop_t_);
            return answer;
        }

        const AcceptedSolution* winner = nullptr;
        for (const AcceptedSolution* h : ranked_history()) {
            if (check_solution(problem_, h->assignment).valid()) {
                winner = h;
                break;
            }
        }

        if (stop_kind_ == StopKind::Sat) {
            answer.time_s = ms_to_seconds(stop_t_);
            if (winner) {
                answer.status = AnswerStatus::Sat;
                answer.assignment = winner->assignment;
            } else {
                answer.status = AnswerStatus::Wrong;
            }
            return answer;
        }

        if (stop_kind_ == StopKind::Optimal) {
            answer.time_s = ms_to_seconds(stop_t_);
            if (winner && winner->objective == claimed_optimal_) {
                answer.status = AnswerStatus::Optimal;
                answer.assignment = winner->assignment;
                answer.objective = winner->objective;
            } else if (winner) {
                // The claimed optimum's assignments were all invalid; the
                // proof is void but a weaker valid solution survives.
                log_.log(end_ms, core_of(stop_solver_), stop_solver_, EventType::CheckFail,
                         "wrong:complete");
                answer.status = AnswerStatus::Sat;
                answer.assignment = winner->assignment;
                answer.objective = winner->objective;
            } else {
                log_.log(end_ms, core_of(stop_solver_), stop_solver_, EventType::CheckFail,
                         "wrong:complete");
                answer.status = AnswerStatus::Wrong;
            }
            return answer;
        }

        // Timeout or early exhaustion.
        if (winner) {
            answer.status = AnswerStatus::Sat;
            answer.assignment = winner->assignment;
            answer.objective = winner->objective;
            return answer;
        }
        if (!history_.empty()) {
            answer.status = AnswerStatus::Wrong;  // everything we accepted failed re-check
            return answer;
        }
        bool any_launched = false;
        for (const auto& core : cores_) any_launched |= core.ever_launched;
        answer.status = any_launched ? AnswerStatus::Unknown : AnswerStatus::Error;
        return answer;
    }

    const ProblemDescriptor& problem_;
    std::map<std::string, SolverSpec> specs_;
    ExecConfig cfg_;
    std::int64_t t_ms_ = 0;
    std::int64_t tr_ms_ = 0;

    BestBoundRegister reg_;
    EventLog log_;
    std::vector<CoreRun> cores_;
    std::unique_ptr<Clock> clock_;
    TempDir scratch_;
    std::size_t launch_seq_ = 0;

    std::vector<AcceptedSolution> history_;
    std::vector<TrailPoint> trail_;
    std::set<std::string> distrusted_;
    std::map<std::string, std::optional<std::int64_t>> solver_best_;
    std::set<std::string> pending_unsat_;
    std::map<std::string, std::int64_t> pending_complete_;
    std::map<std::string, int> solver_core_;
    std::vector<std::string> warnings_;

    bool stopped_ = false;
    StopKind stop_kind_ = StopKind::None;
    std::string stop_solver_;
    std::int64_t stop_t_ = 0;
    std::optional<std::int64_t> claimed_optimal_;
};

}  // namespace detail

/// Runs the whole portfolio per the core assignment and returns the final
/// answer, the event log, and any protocol warnings.
inline RunResult run_portfolio(const ProblemDescriptor& problem, const CoreAssignment& assignment,
                               const std::map<std::string, SolverSpec>& specs,
                               const ExecConfig& cfg) {
    if (cfg.timeout <= 0) throw Error("run_portfolio: timeout must be positive");
    if (assignment.empty()) throw Error("run_portfolio: empty core assignment");
    detail::PortfolioRunner runner(problem, assignment, specs, cfg);
    return runner.run();
}

}  // namespace sunny
