// Scripted stand-in for a constituent solver. Replays the actions from
// --script on the wall clock, speaking the solver wire protocol on stdout,
// then stalls until killed — real solvers do not exit politely either.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sunny/mock_script.hpp"
#include "sunny/scheduler.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);

    auto script_path = sunny::find_flag_value(args, "--script");
    if (!script_path) {
        std::cerr << "usage: mock-solver --script <file> [--bound=<int>] [ignored...]\n";
        return 2;
    }
    std::optional<std::int64_t> bound;
    if (auto b = sunny::find_flag_value(args, "--bound")) {
        auto v = sunny::try_parse_int(*b);
        if (!v) {
            std::cerr << "mock-solver: bad --bound value '" << *b << "'\n";
            return 2;
        }
        bound = *v;
    }

    sunny::MockScript actions;
    try {
        actions = sunny::enabled_actions(sunny::load_mock_script(*script_path), bound);
    } catch (const sunny::Error& e) {
        std::cerr << "mock-solver: " << e.what() << '\n';
        return 1;
    }

    const auto start = std::chrono::steady_clock::now();
    for (const auto& action : actions) {
        std::this_thread::sleep_until(
            start + std::chrono::milliseconds(sunny::seconds_to_ms(action.at_seconds)));
        for (const auto& line : sunny::render_action(action)) std::cout << line << '\n';
        std::cout.flush();
    }
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}
