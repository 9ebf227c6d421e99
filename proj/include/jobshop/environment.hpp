#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jobshop/model.hpp"
#include "jobshop/schedule.hpp"

namespace jobshop {

struct RewardConfig {
    double w_time = 1.0;       // per minute of clock advance
    double w_tardy = 5.0;      // per minute of tardiness, charged at job completion
    double r_complete = 10.0;  // per completed job
    double w_block = 2.0;      // per minute per finished job stuck behind a full buffer
    double w_deadlock = 1000.0;
    double gamma = 0.99;

    void validate() const;
    // Reward = -clock advance; the undiscounted return of a full episode is -makespan.
    static RewardConfig makespan_only();
    bool operator==(const RewardConfig&) const = default;
};

struct Features {
    bool presetup = false;
    bool operator==(const Features&) const = default;
};

enum class ActionKind { Assign, Noop, Presetup };

struct Action {
    ActionKind kind = ActionKind::Noop;
    JobId job = kNone;
    MachineId machine = kNone;
    SetupId setup = kNone;

    static Action assign(JobId j) { return {ActionKind::Assign, j, kNone, kNone}; }
    static Action noop() { return {ActionKind::Noop, kNone, kNone, kNone}; }
    static Action presetup(MachineId m, SetupId s) { return {ActionKind::Presetup, kNone, m, s}; }

    bool operator==(const Action&) const = default;
};

std::string to_string(const Action& action);

// Flat discrete action indexing: [0, n) assign job j, n = no-op, then one
// slot per (machine, setup) pair when pre-setup is enabled.
class ActionSpace {
public:
    ActionSpace() = default;
    ActionSpace(const Instance& instance, Features features);

    int size() const { return size_; }
    int noop_index() const { return jobs_; }
    int encode(const Action& action) const;
    Action decode(int index) const;

private:
    int jobs_ = 0;
    int size_ = 1;
    std::vector<int> presetup_offset_;  // per machine, index of (m, 0)
    std::vector<int> setup_counts_;
};

struct MachineStatus {
    JobId current_job = kNone;
    int current_op = kNone;
    SetupId current_setup = kNeutralSetup;
    std::optional<Minutes> busy_until;  // set while processing or pre-setting up

    bool idle() const { return !busy_until.has_value(); }
};

enum class LocationKind { InBuffer, OnMachine, Done };

struct JobStatus {
    int next_op_index = 0;  // number of completed operations
    LocationKind location = LocationKind::InBuffer;
    MachineId machine = kNone;       // buffer / machine the job is at
    Minutes arrive_at = 0.0;         // end of transport while OnMachine
    Volume held_volume = 0.0;        // amount counted in buffer_load[machine]
    Minutes waiting_since = 0.0;     // when the job last entered InBuffer
    std::optional<Minutes> completion_time;

    bool in_transit(Minutes clock) const { return location == LocationKind::OnMachine && clock < arrive_at; }
};

struct Event {
    Minutes time;
    MachineId machine;
    bool operator==(const Event&) const = default;
};

struct EnvState {
    Minutes clock = 0.0;
    std::vector<MachineStatus> machines;
    std::vector<JobStatus> jobs;
    std::vector<Volume> buffer_load;
    std::vector<Event> events;  // sorted by (time, machine)
    bool done = false;
    bool deadlocked = false;
    std::int64_t steps = 0;
};

struct Observation {
    std::vector<std::vector<double>> machine_info;  // 3 x m
    std::vector<std::vector<double>> job_info;      // 2 x n
    std::vector<double> buffer_info;                // b

    bool operator==(const Observation&) const = default;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    std::vector<std::string> events;
    std::vector<bool> mask;
};

// Deterministic event-driven job-shop environment. Decisions happen at
// decision epochs: assignments and pre-setups leave the clock unchanged, a
// no-op advances it to the next pending event and fires every event due then.
class Environment {
public:
    Environment(std::shared_ptr<const Instance> instance, RewardConfig config = {}, Features features = {});

    Observation reset();
    StepResult step(const Action& action);
    StepResult step(int action_index) { return step(space_.decode(action_index)); }

    Observation observe() const;
    const std::vector<bool>& mask() const { return mask_; }
    bool eligible(const Action& action) const;
    bool any_assign_eligible() const;

    const Instance& instance() const { return *instance_; }
    const std::shared_ptr<const Instance>& instance_ptr() const { return instance_; }
    const EnvState& state() const { return state_; }
    const RewardConfig& config() const { return config_; }
    const Features& features() const { return features_; }
    const ActionSpace& action_space() const { return space_; }
    const Schedule& schedule() const { return schedule_; }

    // KPIs accumulated by the environment itself during the episode.
    Kpis kpis() const;

    // Finished jobs currently unable to move because their next buffer is full.
    int blocked_job_count() const;
    bool machine_blocked(MachineId machine) const;

    // Total time for dispatching `job` right now (transport from its current
    // buffer, setup from the target machine's current setup).
    Minutes dispatch_time(JobId job) const;

    // Key used by exact search and tabular learning. Invariant under clock
    // shifts unless `include_clock` is set.
    std::vector<std::int64_t> canonical_key(bool include_clock) const;

private:
    void refresh_mask();
    void fire_events_at(Minutes time, StepResult& result);
    void sample_buffers();
    Volume free_capacity(MachineId machine) const;
    bool can_accept(JobId job) const;

    std::shared_ptr<const Instance> instance_;
    RewardConfig config_;
    Features features_;
    ActionSpace space_;
    EnvState state_;
    std::vector<bool> mask_;
    Schedule schedule_;
    std::vector<Volume> peak_buffer_;
    std::vector<Minutes> machine_busy_;
    Minutes setup_total_ = 0.0;
    Minutes tardiness_ = 0.0;
    int tardy_jobs_ = 0;
    int completed_ = 0;
    Minutes last_completion_ = 0.0;
};

// One recorded transition.
struct TrajectoryStep {
    std::int64_t index = 0;
    Minutes clock = 0.0;  // after the step
    int action = 0;
    double reward = 0.0;
    Observation observation;  // after the step
};

struct Trajectory {
    Observation initial;
    std::vector<TrajectoryStep> steps;

    double discounted_return(double gamma) const;
};

}  // namespace jobshop
