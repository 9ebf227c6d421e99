#include "jobshop/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jobshop {

namespace {

void require_time(double value, const char* what) {
    if (!std::isfinite(value) || value < 0.0)
        throw DomainError(std::string(what) + " must be finite and non-negative");
}

std::string at(const std::string& prefix, std::size_t i) { return prefix + "[" + std::to_string(i) + "]"; }

void check_square(const std::vector<std::vector<Minutes>>& matrix, std::size_t size, const std::string& path) {
    if (matrix.size() != size)
        throw InstanceError(path, "expected " + std::to_string(size) + " rows, got " + std::to_string(matrix.size()));
    for (std::size_t r = 0; r < size; ++r) {
        if (matrix[r].size() != size)
            throw InstanceError(at(path, r), "expected " + std::to_string(size) + " columns");
        for (std::size_t c = 0; c < size; ++c) {
            const double v = matrix[r][c];
            if (!std::isfinite(v) || v < 0.0)
                throw InstanceError(at(at(path, r), c), "time must be finite and non-negative");
        }
        if (matrix[r][r] != 0.0)
            throw InstanceError(at(at(path, r), r), "diagonal entry must be 0");
    }
}

}  // namespace

int Instance::op_total() const {
    int total = 0;
    for (const auto& job : jobs) total += job.op_count();
    return total;
}

Minutes total_processing_time(int batch_size, Minutes unit_time, Minutes transport, Minutes setup) {
    if (batch_size < 1) throw DomainError("batch size must be at least 1");
    if (!std::isfinite(unit_time) || unit_time <= 0.0) throw DomainError("unit time must be finite and positive");
    require_time(transport, "transport time");
    require_time(setup, "setup time");
    return static_cast<double>(batch_size) * unit_time + transport + setup;
}

Minutes setup_time(const Machine& machine, SetupId from, SetupId to) {
    const int count = machine.setup_count();
    if (from < 0 || from >= count || to < 0 || to >= count)
        throw DomainError("setup id out of range for machine " + machine.name);
    return machine.setup_time[from][to];
}

Minutes transport_time(const Instance& instance, MachineId from, MachineId to) {
    const int m = static_cast<int>(instance.transport.size());
    if (from < 0 || from >= m || to < 0 || to >= m) throw DomainError("machine index out of range");
    return instance.transport[from][to];
}

Volume job_volume_at(const Job& job, int next_op_index) {
    if (next_op_index < 0 || next_op_index > job.op_count())
        throw DomainError("operation index out of range for job " + job.name);
    if (next_op_index == job.op_count()) return 0.0;
    return job.ops[next_op_index].volume;
}

void validate_instance(const Instance& instance) {
    const std::size_t m = instance.machines.size();
    for (std::size_t k = 0; k < m; ++k) {
        const auto& machine = instance.machines[k];
        const std::string path = at("machines", k);
        if (machine.id != static_cast<int>(k)) throw InstanceError(path + ".id", "machine ids must be 0..m-1 in order");
        if (machine.setup_time.empty()) throw InstanceError(path + ".setup_times", "at least the neutral setup is required");
        check_square(machine.setup_time, machine.setup_time.size(), path + ".setup_times");
    }
    check_square(instance.transport, m, "transport");

    if (instance.buffers.size() != m)
        throw InstanceError("buffers", "exactly one buffer per machine is required");
    for (std::size_t k = 0; k < m; ++k) {
        const auto& buffer = instance.buffers[k];
        if (buffer.machine != static_cast<int>(k))
            throw InstanceError(at("buffers", k) + ".machine", "buffer k must belong to machine k");
        if (!std::isfinite(buffer.capacity) || buffer.capacity <= 0.0)
            throw InstanceError(at("buffers", k) + ".capacity", "capacity must be positive");
    }

    for (std::size_t j = 0; j < instance.jobs.size(); ++j) {
        const auto& job = instance.jobs[j];
        const std::string path = at("jobs", j);
        if (job.id != static_cast<int>(j)) throw InstanceError(path + ".id", "job ids must be 0..n-1 in order");
        if (job.batch_size < 1) throw InstanceError(path + ".quantity", "batch size must be at least 1");
        if (!std::isfinite(job.deadline) || job.deadline < 0.0)
            throw InstanceError(path + ".deadline", "deadline must be finite and non-negative");
        if (job.ops.empty()) throw InstanceError(path + ".operations", "a job needs at least one operation");
        for (std::size_t o = 0; o < job.ops.size(); ++o) {
            const auto& op = job.ops[o];
            const std::string op_path = at(path + ".operations", o);
            if (op.machine < 0 || op.machine >= static_cast<int>(m))
                throw InstanceError(op_path + ".machine", "unknown machine");
            if (op.setup < 0 || op.setup >= instance.machines[op.machine].setup_count())
                throw InstanceError(op_path + ".setup", "unknown setup for machine " + instance.machines[op.machine].name);
            if (!std::isfinite(op.unit_time) || op.unit_time <= 0.0)
                throw InstanceError(op_path + ".machining_time", "machining time must be positive");
            if (!std::isfinite(op.volume) || op.volume < 0.0)
                throw InstanceError(op_path + ".volume", "volume must be non-negative");
        }
    }

    const auto loads = initial_buffer_loads(instance);
    for (std::size_t k = 0; k < m; ++k) {
        if (loads[k] > instance.buffers[k].capacity + kTimeEps)
            throw InstanceError(at("buffers", k), "initial placement overflows buffer (" + std::to_string(loads[k]) +
                                                      " > " + std::to_string(instance.buffers[k].capacity) + ")");
    }
}

std::vector<Volume> initial_buffer_loads(const Instance& instance) {
    std::vector<Volume> loads(instance.machines.size(), 0.0);
    for (const auto& job : instance.jobs) {
        if (job.ops.empty()) continue;
        const int first = job.ops.front().machine;
        if (first >= 0 && first < static_cast<int>(loads.size())) loads[first] += job.ops.front().volume;
    }
    return loads;
}

Minutes horizon_estimate(const Instance& instance) {
    Minutes max_transport = 0.0;
    for (const auto& row : instance.transport)
        for (double t : row) max_transport = std::max(max_transport, t);
    Minutes total = 0.0;
    for (const auto& job : instance.jobs) {
        for (const auto& op : job.ops) {
            Minutes max_setup = 0.0;
            for (const auto& row : instance.machines[op.machine].setup_time)
                for (double s : row) max_setup = std::max(max_setup, s);
            total += job.batch_size * op.unit_time + max_transport + max_setup;
        }
    }
    return std::max(total, 1.0);
}

Instance example_instance() {
    Instance inst;
    inst.name = "example3x3";
    // Machine 1: symmetric, Machine 2: asymmetric, Machine 3: asymmetric with virtual s1<->s2 change.
    inst.machines = {
        {0, "M1", {{0, 4, 4, 4}, {4, 0, 8, 8}, {4, 8, 0, 8}, {4, 8, 8, 0}}},
        {1, "M2", {{0, 9, 7, 8}, {5, 0, 10, 13}, {5, 8, 0, 6}, {5, 8, 7, 0}}},
        {2, "M3", {{0, 4, 7, 5}, {2, 0, 0, 7}, {2, 0, 0, 6}, {2, 6, 8, 0}}},
    };
    inst.transport = {{0, 10, 15}, {10, 0, 15}, {15, 15, 0}};
    inst.buffers = {{0, 60}, {1, 43}, {2, 30}};
    inst.jobs = {
        {0, "J1", 400, 120, {{0, 1, 0.04, 30}, {1, 1, 0.08, 20}, {2, 1, 0.0625, 15}}},
        {1, "J2", 100, 110, {{0, 2, 0.12, 10}, {2, 2, 0.14, 8}, {1, 2, 0.13, 5}}},
        {2, "J3", 400, 100, {{0, 3, 0.0625, 20}, {1, 3, 0.04, 15}, {2, 3, 0.0625, 10}}},
    };
    return inst;
}

}  // namespace jobshop
