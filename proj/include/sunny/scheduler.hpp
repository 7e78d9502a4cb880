#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sunny/errors.hpp"
#include "sunny/knowledge_base.hpp"

namespace sunny {

// All schedule arithmetic is integer milliseconds so budgets add up exactly;
// the remainder of every proportional division lands on the first slot.

inline std::int64_t seconds_to_ms(double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

inline double ms_to_seconds(std::int64_t ms) { return static_cast<double>(ms) / 1000.0; }

struct Slot {
    std::string solver;
    std::int64_t ms = 0;

    bool operator==(const Slot&) const = default;
};

/// Sequential plan: run each slot's solver for its duration, in order.
/// Invariants: durations positive, solver ids distinct, Σ durations = total.
struct Schedule {
    std::vector<Slot> slots;
    std::int64_t total_ms = 0;
};

struct CoreSlot {
    std::string solver;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
};

/// One core's timeline; cores are numbered from 1.
struct CoreTimeline {
    int core = 0;
    std::vector<CoreSlot> slots;
};

using CoreAssignment = std::vector<CoreTimeline>;

namespace detail {

// Small fixed bitset over neighborhood indices, enough for exhaustive
// subset scoring without allocating per candidate.
struct Cover {
    std::vector<std::uint64_t> words;

    explicit Cover(std::size_t bits = 0) : words((bits + 63) / 64, 0) {}
    void set(std::size_t i) { words[i / 64] |= std::uint64_t{1} << (i % 64); }
    void merge(const Cover& other) {
        for (std::size_t w = 0; w < words.size(); ++w) words[w] |= other.words[w];
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
};

/// Divides `total` across the positive shares proportionally (floor), puts
/// the rounding remainder on the first slot, and drops slots that still come
/// out empty. The input order fixes the output sequence.
inline std::vector<Slot> apportion(const std::vector<std::pair<std::string, std::int64_t>>& shares,
                                   std::int64_t total) {
    std::int64_t share_sum = 0;
    for (const auto& [id, s] : shares) share_sum += s > 0 ? s : 0;
    std::vector<Slot> out;
    if (share_sum == 0) return out;
    std::int64_t assigned = 0;
    for (const auto& [id, s] : shares) {
        if (s <= 0) continue;
        std::int64_t ms = total * s / share_sum;
        assigned += ms;
        out.push_back({id, ms});
    }
    out.front().ms += total - assigned;
    std::erase_if(out, [](const Slot& s) { return s.ms == 0; });
    return out;
}

}  // namespace detail

/// The SUNNY schedule for one neighborhood: pick the smallest solver subset
/// covering the most neighborhood instances, hand out time proportional to
/// each member's solved count (the uncovered share goes to the backup
/// solver), and order the slots fastest-average first.
inline Schedule sunny_schedule(const NeighborhoodStats& stats,
                               const std::vector<std::string>& portfolio,
                               const std::string& backup, std::int64_t t_ms) {
    if (portfolio.empty()) throw Error("sunny_schedule: empty portfolio");
    if (t_ms <= 0) throw Error("sunny_schedule: budget must be positive");
    std::vector<std::string> ids = portfolio;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw Error("sunny_schedule: duplicate solver in portfolio");
    if (!std::binary_search(ids.begin(), ids.end(), backup))
        throw Error("sunny_schedule: backup '" + backup + "' not in portfolio");
    const std::size_t n = ids.size();
    if (n > 20) throw Error("sunny_schedule: portfolio too large for exhaustive selection");

    // Index the neighborhood and build one coverage bitset per solver.
    std::map<std::string, std::size_t> inst_index;
    for (const auto& inst : stats.instances) inst_index.emplace(inst, inst_index.size());
    const std::size_t n_inst = inst_index.size();
    std::vector<detail::Cover> covers;
    std::vector<double> avg_times(n, 0.0);
    covers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SolverPerf perf = stats.perf(ids[i]);
        detail::Cover c(n_inst);
        for (const auto& inst : perf.solved_instances) c.set(inst_index.at(inst));
        covers.push_back(std::move(c));
        avg_times[i] = perf.avg_time;
    }

    // Exhaustive selection: maximize covered instances, then minimize subset
    // size, then total average time, then take the lexicographically smallest
    // id list. The full portfolio realizes the maximum coverage, so scanning
    // cardinalities upward and stopping at the first hit is equivalent.
    detail::Cover everything(n_inst);
    for (const auto& c : covers) everything.merge(c);
    const std::size_t best_cover = everything.count();

    std::vector<std::size_t> chosen;
    bool found = false;
    for (std::size_t card = 0; card <= n && !found; ++card) {
        double best_time = 0.0;
        std::vector<std::size_t> best_ids;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != card) continue;
            detail::Cover c(n_inst);
            double time_sum = 0.0;
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (!(mask & (1u << i))) continue;
                c.merge(covers[i]);
                time_sum += avg_times[i];
                members.push_back(i);
            }
            if (c.count() != best_cover) continue;
            if (!found || time_sum < best_time ||
                (time_sum == best_time && members < best_ids)) {
                best_time = time_sum;
                best_ids = members;
                found = true;
            }
        }
        if (found) chosen = best_ids;
    }

    // Proportional shares: solved counts for the selected members, plus the
    // uncovered remainder for the backup (which joins if absent).
    detail::Cover covered(n_inst);
    std::map<std::string, std::int64_t> share;
    for (std::size_t i : chosen) {
        covered.merge(covers[i]);
        share[ids[i]] = static_cast<std::int64_t>(stats.perf(ids[i]).solved);
    }
    const std::int64_t uncovered = static_cast<std::int64_t>(n_inst - covered.count());
    share[backup] += uncovered;

    std::int64_t share_sum = 0;
    for (const auto& [id, s] : share) share_sum += s;
    Schedule result;
    result.total_ms = t_ms;
    if (share_sum == 0) {
        result.slots.push_back({backup, t_ms});
        return result;
    }

    // Fastest average first; ties by id.
    std::vector<std::pair<std::string, std::int64_t>> ordered(share.begin(), share.end());
    std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
        double ta = stats.perf(a.first).avg_time;
        double tb = stats.perf(b.first).avg_time;
        return ta != tb ? ta < tb : a.first < b.first;
    });
    result.slots = detail::apportion(ordered, t_ms);
    return result;
}

/// Even split of the budget across the given solvers, keeping their order.
/// This is the no-selection degenerate schedule: every configured solver gets
/// the same slice regardless of any knowledge base.
inline Schedule uniform_schedule(const std::vector<std::string>& ids, std::int64_t t_ms) {
    if (ids.empty()) throw Error("uniform_schedule: no solvers");
    if (t_ms <= 0) throw Error("uniform_schedule: budget must be positive");
    std::set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size()) throw Error("uniform_schedule: duplicate solver id");
    std::vector<std::pair<std::string, std::int64_t>> shares;
    for (const auto& id : ids) shares.emplace_back(id, 1);
    Schedule result;
    result.total_ms = t_ms;
    result.slots = detail::apportion(shares, t_ms);
    return result;
}

/// Maps a sequential schedule onto c cores: with at most c slots every solver
/// gets a dedicated core for the whole window; otherwise the first c−1 slots
/// each take a core for [0, T] and the rest share the last core, stretched
/// linearly so they still cover [0, T].
inline CoreAssignment parallelize(const Schedule& sigma, int cores, std::int64_t t_ms) {
    if (cores < 1) throw Error("parallelize: need at least one core");
    if (sigma.slots.empty()) throw Error("parallelize: empty schedule");
    if (sigma.total_ms != t_ms) throw Error("parallelize: schedule total does not match budget");

    CoreAssignment out;
    const std::size_t n = sigma.slots.size();
    if (n <= static_cast<std::size_t>(cores)) {
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({static_cast<int>(i + 1), {{sigma.slots[i].solver, 0, t_ms}}});
        return out;
    }

    for (int i = 0; i + 1 < cores; ++i)
        out.push_back({i + 1, {{sigma.slots[static_cast<std::size_t>(i)].solver, 0, t_ms}}});

    std::vector<std::pair<std::string, std::int64_t>> tail;
    for (std::size_t i = static_cast<std::size_t>(cores) - 1; i < n; ++i)
        tail.emplace_back(sigma.slots[i].solver, sigma.slots[i].ms);
    std::vector<Slot> widened = detail::apportion(tail, t_ms);

    CoreTimeline last;
    last.core = cores;
    std::int64_t at = 0;
    for (const auto& slot : widened) {
        last.slots.push_back({slot.solver, at, at + slot.ms});
        at += slot.ms;
    }
    out.push_back(std::move(last));
    return out;
}

/// Prepends an even split of t_pre across the static solvers, compressing the
/// main schedule into what remains. A solver appearing in both keeps its
/// earliest slot with the durations summed.
inline Schedule presolve_prefix(const std::vector<std::string>& static_list, std::int64_t t_pre_ms,
                                const Schedule& main) {
    if (static_list.empty()) throw Error("presolve_prefix: empty static solver list");
    std::set<std::string> uniq(static_list.begin(), static_list.end());
    if (uniq.size() != static_list.size())
        throw Error("presolve_prefix: duplicate solver in static list");
    if (t_pre_ms <= 0 || t_pre_ms >= main.total_ms)
        throw Error("presolve_prefix: presolve budget must lie strictly inside the total budget");

    std::vector<std::pair<std::string, std::int64_t>> prefix_shares;
    for (const auto& id : static_list) prefix_shares.emplace_back(id, 1);
    std::vector<Slot> merged = detail::apportion(prefix_shares, t_pre_ms);

    std::vector<std::pair<std::string, std::int64_t>> main_shares;
    for (const auto& slot : main.slots) main_shares.emplace_back(slot.solver, slot.ms);
    std::vector<Slot> compressed = detail::apportion(main_shares, main.total_ms - t_pre_ms);

    for (const auto& slot : compressed) {
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const Slot& s) { return s.solver == slot.solver; });
        if (it != merged.end()) it->ms += slot.ms;
        else merged.push_back(slot);
    }

    Schedule result;
    result.total_ms = main.total_ms;
    result.slots = std::move(merged);
    return result;
}

}  // namespace sunny
