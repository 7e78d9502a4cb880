#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sunny/io.hpp"
#include "sunny/problem.hpp"

namespace sunny {

// Solver wire protocol, mirroring the FlatZinc output conventions:
//   <id> = <int>          assignment line inside a solution block
//   ----------            end of one solution block
//   ==========            search complete (best solution proved / exhausted)
//   =====UNSATISFIABLE=====   proven unsatisfiable
// Anything else is noise: ignored, but remembered as a warning.

struct SolutionEvent {
    Assignment assignment;
};
struct CompleteEvent {};
struct UnsatEvent {};
/// A solution block containing a malformed assignment line. The whole block
/// is discarded — half a solution is worse than none.
struct ProtocolErrorEvent {
    std::string message;
};

using OutputEvent = std::variant<SolutionEvent, CompleteEvent, UnsatEvent, ProtocolErrorEvent>;

inline constexpr std::string_view kSolutionSeparator = "----------";
inline constexpr std::string_view kCompleteMarker = "==========";
inline constexpr std::string_view kUnsatMarker = "=====UNSATISFIABLE=====";

/// Incremental line-by-line protocol reader; one instance per solver stream.
class OutputParser {
public:
    /// Feeds one line (without terminator) and returns the events it closes.
    std::vector<OutputEvent> feed_line(std::string_view raw) {
        ++line_no_;
        std::vector<OutputEvent> events;
        const std::string_view line = trim(raw);

        if (line == kSolutionSeparator) {
            if (poisoned_)
                events.push_back(ProtocolErrorEvent{poison_});
            else
                events.push_back(SolutionEvent{std::move(pending_)});
            pending_.clear();
            poisoned_ = false;
            poison_.clear();
            return events;
        }
        if (line == kCompleteMarker) {
            events.push_back(CompleteEvent{});
            return events;
        }
        if (line == kUnsatMarker) {
            events.push_back(UnsatEvent{});
            return events;
        }
        if (line.empty()) return events;

        // A single '=' with an identifier on the left is an assignment line;
        // if its right side is not an integer the enclosing block is spoiled.
        auto parts = split(line, '=');
        if (parts.size() == 2 && is_identifier(trim(parts[0]))) {
            auto value = try_parse_int(parts[1]);
            if (!value) {
                poisoned_ = true;
                poison_ = "line " + std::to_string(line_no_) + ": bad assignment value in '" +
                          std::string(line) + "'";
            } else {
                pending_[std::string(trim(parts[0]))] = *value;
            }
            return events;
        }

        warnings_.push_back("line " + std::to_string(line_no_) + ": ignored '" +
                            std::string(line) + "'");
        return events;
    }

    /// Noise lines seen so far; the caller decides where to surface them.
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Assignment lines not yet closed by a separator (discarded on kill).
    bool has_partial_block() const { return !pending_.empty() || poisoned_; }

private:
    Assignment pending_;
    bool poisoned_ = false;
    std::string poison_;
    std::vector<std::string> warnings_;
    std::size_t line_no_ = 0;
};

/// One-shot convenience over a whole captured stream.
inline std::vector<OutputEvent> parse_solver_output(const std::string& text) {
    OutputParser parser;
    std::vector<OutputEvent> events;
    for (const auto& line : to_lines(text)) {
        auto batch = parser.feed_line(line);
        events.insert(events.end(), batch.begin(), batch.end());
    }
    return events;
}

}  // namespace sunny
