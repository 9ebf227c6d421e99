#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "jobshop/io.hpp"
#include "jobshop/model.hpp"

namespace jobshop::testing {

// Optimal makespan of the bundled 3x3 instance. Its buffers never bind on an
// optimal schedule, so it equals the permutation oracle on the roomy copy.
inline constexpr double kExampleOptimalMakespan = 163.0;

inline std::shared_ptr<const Instance> shared(Instance inst) { return std::make_shared<const Instance>(std::move(inst)); }

inline std::shared_ptr<const Instance> example() { return shared(example_instance()); }

inline GenSpec small_spec(std::uint64_t seed, int max_jobs, int max_machines) {
    GenSpec spec;
    spec.seed = seed;
    spec.jobs = {1, max_jobs};
    spec.machines = {1, max_machines};
    return spec;
}

// Non-delay list scheduling over every interleaving of the job routes,
// ignoring buffers. Each operation starts when both its machine and its job
// are free; the block covers transport + setup + processing. With buffers
// large enough to never bind, its minimum is the optimal makespan.
inline double list_schedule_makespan(const Instance& inst, const std::vector<int>& sequence) {
    const int m = inst.machine_count();
    std::vector<double> machine_free(m, 0.0);
    std::vector<int> machine_setup(m, kNeutralSetup);
    std::vector<double> job_ready(inst.job_count(), 0.0);
    std::vector<int> next(inst.job_count(), 0);
    std::vector<int> at(inst.job_count());
    for (int j = 0; j < inst.job_count(); ++j) at[j] = inst.jobs[j].ops.front().machine;
    double makespan = 0.0;
    for (int j : sequence) {
        const auto& op = inst.jobs[j].ops[next[j]];
        const double start = std::max(machine_free[op.machine], job_ready[j]);
        const double t = inst.transport[at[j]][op.machine];
        const double s = inst.machines[op.machine].setup_time[machine_setup[op.machine]][op.setup];
        const double end = start + t + s + inst.jobs[j].batch_size * op.unit_time;
        machine_free[op.machine] = end;
        machine_setup[op.machine] = op.setup;
        job_ready[j] = end;
        at[j] = op.machine;
        ++next[j];
        makespan = std::max(makespan, end);
    }
    return makespan;
}

// Minimum over all operation interleavings (multiset permutations of job ids).
inline double permutation_oracle_makespan(const Instance& inst) {
    std::vector<int> seq;
    for (const auto& job : inst.jobs)
        for (int o = 0; o < job.op_count(); ++o) seq.push_back(job.id);
    std::sort(seq.begin(), seq.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, list_schedule_makespan(inst, seq));
    } while (std::next_permutation(seq.begin(), seq.end()));
    return best;
}

// Same instance with every buffer large enough to hold all jobs at once.
inline Instance with_roomy_buffers(Instance inst) {
    double total = 0.0;
    for (const auto& job : inst.jobs)
        for (const auto& op : job.ops) total += op.volume;
    for (auto& b : inst.buffers) b.capacity = std::max(total, 1.0);
    return inst;
}

}  // namespace jobshop::testing
