#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "jobshop/environment.hpp"

namespace jobshop {

enum class Objective { Makespan, TotalTardiness };

struct ExactOptions {
    std::int64_t node_limit = 10'000'000;
    std::optional<double> time_budget_seconds;  // unlimited when empty
};

struct ExactResult {
    Schedule schedule;
    Kpis kpis;
    double value = 0.0;       // optimal makespan or total tardiness
    std::vector<int> actions;  // optimal action sequence from the start state
    std::int64_t nodes = 0;    // distinct states expanded
};

// Depth-first search over every decision epoch, branching on each eligible
// assignment and the no-op, with memoisation on the canonical state. Starts
// from `start`'s current state, so a partially executed environment can be
// completed optimally. Pre-setup actions are not branched on. Throws
// GuardExceeded ("instance too large for exact search") when the node limit or
// time budget runs out, and DomainError when no complete schedule exists.
ExactResult brute_force_optimal(const Environment& start, Objective objective, const ExactOptions& options = {});

ExactResult brute_force_optimal(std::shared_ptr<const Instance> instance, Objective objective,
                                const ExactOptions& options = {});

}  // namespace jobshop
