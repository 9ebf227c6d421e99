#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jobshop/errors.hpp"

namespace jobshop {

// All times are minutes, all volumes are the instance's volume unit (m^3 in
// the bundled example).
using Minutes = double;
using Volume = double;

using MachineId = int;
using JobId = int;
// Setup label local to a machine. 0 is the neutral setup (no tooling mounted).
using SetupId = int;

inline constexpr int kNone = -1;
inline constexpr SetupId kNeutralSetup = 0;

// Absolute tolerance for comparing times and volumes.
inline constexpr double kTimeEps = 1e-9;

inline bool time_eq(Minutes a, Minutes b) { return a - b <= kTimeEps && b - a <= kTimeEps; }
inline bool time_le(Minutes a, Minutes b) { return a <= b + kTimeEps; }
inline bool time_lt(Minutes a, Minutes b) { return a < b - kTimeEps; }

struct Machine {
    MachineId id = 0;
    std::string name;
    // setup_time[from][to]; square, size = number of setups including neutral.
    std::vector<std::vector<Minutes>> setup_time{{0.0}};

    int setup_count() const { return static_cast<int>(setup_time.size()); }
    bool operator==(const Machine&) const = default;
};

struct Operation {
    MachineId machine = 0;
    SetupId setup = kNeutralSetup;
    Minutes unit_time = 0.0;  // per piece
    Volume volume = 0.0;      // occupied while waiting for and during this operation
    bool operator==(const Operation&) const = default;
};

struct Job {
    JobId id = 0;
    std::string name;
    int batch_size = 1;
    Minutes deadline = 0.0;
    std::vector<Operation> ops;  // fixed machine sequence

    int op_count() const { return static_cast<int>(ops.size()); }
    bool operator==(const Job&) const = default;
};

struct BufferSpec {
    MachineId machine = 0;
    Volume capacity = 0.0;
    bool operator==(const BufferSpec&) const = default;
};

struct Instance {
    std::string name;
    std::vector<Machine> machines;
    std::vector<Job> jobs;
    std::vector<BufferSpec> buffers;  // buffers[k] sits in front of machines[k]
    std::vector<std::vector<Minutes>> transport;

    int machine_count() const { return static_cast<int>(machines.size()); }
    int job_count() const { return static_cast<int>(jobs.size()); }
    int op_total() const;
    bool operator==(const Instance&) const = default;
};

// T_total = batch * unit_time + transport + setup.
Minutes total_processing_time(int batch_size, Minutes unit_time, Minutes transport, Minutes setup);

Minutes setup_time(const Machine& machine, SetupId from, SetupId to);

Minutes transport_time(const Instance& instance, MachineId from, MachineId to);

// Volume of `job` given how many of its operations are already complete.
// A finished job has left the shop and occupies nothing.
Volume job_volume_at(const Job& job, int next_op_index);

// Throws InstanceError naming the first broken invariant.
void validate_instance(const Instance& instance);

// Sum of first-operation volumes per machine buffer.
std::vector<Volume> initial_buffer_loads(const Instance& instance);

// Upper bound on the full schedule length: every operation with worst-case
// transport and setup, run back to back.
Minutes horizon_estimate(const Instance& instance);

// Bundled 3 jobs x 3 machines example. Unit times for O13, O31 and O33 are
// 0.0625, which makes J3 on M1 take exactly 29 minutes.
Instance example_instance();

}  // namespace jobshop
