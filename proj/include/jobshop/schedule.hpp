#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jobshop/model.hpp"

namespace jobshop {

enum class IntervalKind { Setup, Transport, Process };

const char* to_string(IntervalKind kind);

// One dispatched operation (kind = Process) or one stand-alone pre-setup
// (kind = Setup, job = kNone). An operation's machine block is laid out as
// transport [transport_start, setup_start), setup [setup_start, proc_start),
// process [proc_start, end).
struct ScheduledInterval {
    IntervalKind kind = IntervalKind::Process;
    JobId job = kNone;
    int op_index = kNone;
    MachineId machine = 0;
    Minutes transport_start = 0.0;
    Minutes setup_start = 0.0;
    Minutes proc_start = 0.0;
    Minutes end = 0.0;
    SetupId setup_from = kNeutralSetup;
    SetupId setup_to = kNeutralSetup;

    bool operator==(const ScheduledInterval&) const = default;
};

// A drawable piece of a ScheduledInterval.
struct Segment {
    IntervalKind kind;
    JobId job;
    int op_index;
    MachineId machine;
    Minutes start;
    Minutes end;
};

struct Schedule {
    std::vector<ScheduledInterval> intervals;
    // Completion time per job; nullopt while the job still has operations left.
    std::vector<std::optional<Minutes>> completion;

    // Non-empty segments in a stable order (machine, start, kind).
    std::vector<Segment> segments() const;
    bool operator==(const Schedule&) const = default;
};

enum class ViolationCode { Overlap, Sequence, SetupMismatch, BufferOverflow, TransportUnderrun, Preemption };

const char* to_string(ViolationCode code);

struct Violation {
    ViolationCode code;
    std::string detail;
    Minutes time = 0.0;
};

struct Kpis {
    Minutes makespan = 0.0;
    Minutes total_tardiness = 0.0;
    int tardy_jobs = 0;
    std::vector<Volume> peak_buffer;
    std::vector<double> machine_utilization;
    Minutes setup_time_total = 0.0;
    int completed_jobs = 0;

    bool operator==(const Kpis&) const = default;
};

class ScheduleError : public std::runtime_error {
public:
    ScheduleError(const std::string& what, std::vector<Violation> violations)
        : std::runtime_error(what), violations_(std::move(violations)) {}
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Checks machine exclusivity, non-preemption, operation order and transport
// gaps, setup state, and buffer occupancy under dispatch-time reservation.
// Deadlines are not violations. Partial schedules (every job holds a prefix of
// its operations) are accepted. Throws ScheduleError when the schedule names
// jobs, operations or machines the instance does not have.
std::vector<Violation> validate_schedule(const Instance& instance, const Schedule& schedule);

// Buffer loads sampled at every event instant after all changes at that
// instant are applied. Used by both the validator and compute_kpis.
struct BufferTrace {
    std::vector<Minutes> times;
    std::vector<std::vector<Volume>> loads;
};
BufferTrace replay_buffers(const Instance& instance, const Schedule& schedule);

// Throws ScheduleError listing violations when the schedule is infeasible.
Kpis compute_kpis(const Instance& instance, const Schedule& schedule);

enum class GanttFormat { Svg, Text };

std::string render_gantt(const Instance& instance, const Schedule& schedule, GanttFormat format);

std::string schedule_to_csv(const Instance& instance, const Schedule& schedule);

// Three decimals, trailing zeros trimmed ("29", "12.5").
std::string format_number(double value);

}  // namespace jobshop
