#include "jobshop/environment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jobshop {

namespace {

std::int64_t quantize(double value) { return std::llround(value * 1e6); }

}  // namespace

void RewardConfig::validate() const {
    for (double w : {w_time, w_tardy, r_complete, w_block, w_deadlock, gamma})
        if (!std::isfinite(w)) throw DomainError("reward weights must be finite");
    if (w_time < 0 || w_tardy < 0 || w_block < 0) throw DomainError("penalty weights must be non-negative");
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("gamma must lie in [0, 1]");
}

RewardConfig RewardConfig::makespan_only() {
    RewardConfig cfg;
    cfg.w_time = 1.0;
    cfg.w_tardy = 0.0;
    cfg.r_complete = 0.0;
    cfg.w_block = 0.0;
    cfg.w_deadlock = 1000.0;
    cfg.gamma = 1.0;
    return cfg;
}

std::string to_string(const Action& action) {
    switch (action.kind) {
        case ActionKind::Assign: return "assign J" + std::to_string(action.job + 1);
        case ActionKind::Noop: return "noop";
        case ActionKind::Presetup:
            return "presetup M" + std::to_string(action.machine + 1) + " s" + std::to_string(action.setup);
    }
    return "?";
}

ActionSpace::ActionSpace(const Instance& instance, Features features) : jobs_(instance.job_count()) {
    size_ = jobs_ + 1;
    if (features.presetup) {
        for (const auto& machine : instance.machines) {
            presetup_offset_.push_back(size_);
            setup_counts_.push_back(machine.setup_count());
            size_ += machine.setup_count();
        }
    }
}

int ActionSpace::encode(const Action& action) const {
    switch (action.kind) {
        case ActionKind::Assign:
            if (action.job < 0 || action.job >= jobs_) throw DomainError("job index out of range");
            return action.job;
        case ActionKind::Noop: return jobs_;
        case ActionKind::Presetup: {
            const auto m = static_cast<std::size_t>(action.machine);
            if (action.machine < 0 || m >= presetup_offset_.size())
                throw DomainError("pre-setup action not part of this action space");
            if (action.setup < 0 || action.setup >= setup_counts_[m]) throw DomainError("setup id out of range");
            return presetup_offset_[m] + action.setup;
        }
    }
    throw DomainError("unknown action kind");
}

Action ActionSpace::decode(int index) const {
    if (index < 0 || index >= size_) throw DomainError("action index out of range");
    if (index < jobs_) return Action::assign(index);
    if (index == jobs_) return Action::noop();
    for (std::size_t m = presetup_offset_.size(); m-- > 0;) {
        if (index >= presetup_offset_[m]) return Action::presetup(static_cast<int>(m), index - presetup_offset_[m]);
    }
    throw DomainError("action index out of range");
}

Environment::Environment(std::shared_ptr<const Instance> instance, RewardConfig config, Features features)
    : instance_(std::move(instance)), config_(config), features_(features) {
    if (!instance_) throw DomainError("environment needs an instance");
    validate_instance(*instance_);
    config_.validate();
    space_ = ActionSpace(*instance_, features_);
    reset();
}

Observation Environment::reset() {
    const auto& inst = *instance_;
    state_ = EnvState{};
    state_.machines.assign(inst.machine_count(), MachineStatus{});
    state_.jobs.assign(inst.job_count(), JobStatus{});
    state_.buffer_load.assign(inst.machine_count(), 0.0);
    for (int j = 0; j < inst.job_count(); ++j) {
        auto& js = state_.jobs[j];
        const auto& first = inst.jobs[j].ops.front();
        js.machine = first.machine;
        js.held_volume = first.volume;
        state_.buffer_load[first.machine] += first.volume;
    }
    schedule_ = Schedule{};
    schedule_.completion.assign(inst.job_count(), std::nullopt);
    peak_buffer_ = state_.buffer_load;
    machine_busy_.assign(inst.machine_count(), 0.0);
    setup_total_ = 0.0;
    tardiness_ = 0.0;
    tardy_jobs_ = 0;
    completed_ = 0;
    last_completion_ = 0.0;

    if (inst.job_count() == 0) state_.done = true;
    refresh_mask();
    return observe();
}

Volume Environment::free_capacity(MachineId machine) const {
    return instance_->buffers[machine].capacity - state_.buffer_load[machine];
}

bool Environment::can_accept(JobId job) const {
    const auto& js = state_.jobs[job];
    const auto& op = instance_->jobs[job].ops[js.next_op_index];
    const Volume released = js.machine == op.machine ? js.held_volume : 0.0;
    return op.volume <= free_capacity(op.machine) + released + kTimeEps;
}

bool Environment::machine_blocked(MachineId machine) const {
    for (JobId j = 0; j < instance_->job_count(); ++j) {
        const auto& js = state_.jobs[j];
        if (js.location != LocationKind::InBuffer || js.machine != machine || js.next_op_index == 0) continue;
        const auto& next = instance_->jobs[j].ops[js.next_op_index];
        if (next.machine != machine && !can_accept(j)) return true;
    }
    return false;
}

int Environment::blocked_job_count() const {
    int count = 0;
    for (JobId j = 0; j < instance_->job_count(); ++j) {
        const auto& js = state_.jobs[j];
        if (js.location != LocationKind::InBuffer || js.next_op_index == 0) continue;
        if (!can_accept(j)) ++count;
    }
    return count;
}

bool Environment::eligible(const Action& action) const {
    if (state_.done) return false;
    const auto& inst = *instance_;
    switch (action.kind) {
        case ActionKind::Assign: {
            if (action.job < 0 || action.job >= inst.job_count()) return false;
            const auto& js = state_.jobs[action.job];
            if (js.location != LocationKind::InBuffer) return false;
            const MachineId target = inst.jobs[action.job].ops[js.next_op_index].machine;
            if (!state_.machines[target].idle() || machine_blocked(target)) return false;
            return can_accept(action.job);
        }
        case ActionKind::Noop: return !state_.events.empty();
        case ActionKind::Presetup: {
            if (!features_.presetup) return false;
            if (action.machine < 0 || action.machine >= inst.machine_count()) return false;
            const auto& ms = state_.machines[action.machine];
            if (action.setup < 0 || action.setup >= inst.machines[action.machine].setup_count()) return false;
            return ms.idle() && !machine_blocked(action.machine) && action.setup != ms.current_setup;
        }
    }
    return false;
}

bool Environment::any_assign_eligible() const {
    for (JobId j = 0; j < instance_->job_count(); ++j)
        if (mask_[j]) return true;
    return false;
}

void Environment::refresh_mask() {
    mask_.assign(space_.size(), false);
    if (state_.done) return;
    for (int a = 0; a < space_.size(); ++a) mask_[a] = eligible(space_.decode(a));
}

Minutes Environment::dispatch_time(JobId job) const {
    const auto& inst = *instance_;
    const auto& js = state_.jobs.at(job);
    if (js.location != LocationKind::InBuffer) throw DomainError("job is not waiting in a buffer");
    const auto& spec = inst.jobs[job];
    const auto& op = spec.ops[js.next_op_index];
    const Minutes t = transport_time(inst, js.machine, op.machine);
    const Minutes s = setup_time(inst.machines[op.machine], state_.machines[op.machine].current_setup, op.setup);
    return total_processing_time(spec.batch_size, op.unit_time, t, s);
}

void Environment::sample_buffers() {
    for (std::size_t k = 0; k < peak_buffer_.size(); ++k)
        peak_buffer_[k] = std::max(peak_buffer_[k], state_.buffer_load[k]);
}

void Environment::fire_events_at(Minutes time, StepResult& result) {
    const auto& inst = *instance_;
    std::vector<Event> due;
    auto split = std::find_if(state_.events.begin(), state_.events.end(),
                              [&](const Event& e) { return !time_le(e.time, time); });
    due.assign(state_.events.begin(), split);
    state_.events.erase(state_.events.begin(), split);
    std::sort(due.begin(), due.end(), [](const Event& a, const Event& b) { return a.machine < b.machine; });

    for (const auto& event : due) {
        auto& ms = state_.machines[event.machine];
        std::ostringstream log;
        log << "t=" << state_.clock << " ";
        if (ms.current_job == kNone) {
            log << "setup done on " << inst.machines[event.machine].name;
            ms.busy_until.reset();
            result.events.push_back(log.str());
            continue;
        }
        const JobId j = ms.current_job;
        const auto& spec = inst.jobs[j];
        auto& js = state_.jobs[j];
        js.next_op_index = ms.current_op + 1;
        ms.current_job = kNone;
        ms.current_op = kNone;
        ms.busy_until.reset();
        log << "complete " << spec.name << " op " << js.next_op_index << " on " << inst.machines[event.machine].name;

        if (js.next_op_index == spec.op_count()) {
            state_.buffer_load[event.machine] -= js.held_volume;
            js.held_volume = 0.0;
            js.location = LocationKind::Done;
            js.completion_time = state_.clock;
            schedule_.completion[j] = state_.clock;
            last_completion_ = std::max(last_completion_, state_.clock);
            ++completed_;
            const Minutes tardy = std::max(0.0, state_.clock - spec.deadline);
            if (tardy > kTimeEps) {
                tardiness_ += tardy;
                ++tardy_jobs_;
            }
            result.reward += config_.r_complete - config_.w_tardy * tardy;
            log << " (job done)";
        } else {
            // The finished job stays in the buffer in front of this machine
            // until dispatched; it never claims more than it already holds.
            const Volume next_volume = spec.ops[js.next_op_index].volume;
            const Volume held = std::min(js.held_volume, next_volume);
            state_.buffer_load[event.machine] -= js.held_volume - held;
            js.held_volume = held;
            js.location = LocationKind::InBuffer;
            js.waiting_since = state_.clock;
        }
        result.events.push_back(log.str());
    }
}

StepResult Environment::step(const Action& action) {
    if (state_.done) throw MaskedActionError("episode is finished");
    if (!eligible(action)) throw MaskedActionError("masked action: " + to_string(action));

    const auto& inst = *instance_;
    StepResult result;
    auto push_event = [this](Event e) {
        auto pos = std::upper_bound(state_.events.begin(), state_.events.end(), e, [](const Event& a, const Event& b) {
            return a.time < b.time || (a.time == b.time && a.machine < b.machine);
        });
        state_.events.insert(pos, e);
    };

    switch (action.kind) {
        case ActionKind::Assign: {
            const JobId j = action.job;
            const auto& spec = inst.jobs[j];
            auto& js = state_.jobs[j];
            const int k = js.next_op_index;
            const auto& op = spec.ops[k];
            auto& ms = state_.machines[op.machine];
            const Minutes t = transport_time(inst, js.machine, op.machine);
            const SetupId from = ms.current_setup;
            const Minutes s = setup_time(inst.machines[op.machine], from, op.setup);
            const Minutes total = total_processing_time(spec.batch_size, op.unit_time, t, s);

            state_.buffer_load[js.machine] -= js.held_volume;
            state_.buffer_load[op.machine] += op.volume;
            js.held_volume = op.volume;
            js.machine = op.machine;
            js.location = LocationKind::OnMachine;
            js.arrive_at = state_.clock + t;

            ms.current_job = j;
            ms.current_op = k;
            ms.current_setup = op.setup;
            ms.busy_until = state_.clock + total;
            push_event({state_.clock + total, op.machine});

            ScheduledInterval iv;
            iv.kind = IntervalKind::Process;
            iv.job = j;
            iv.op_index = k;
            iv.machine = op.machine;
            iv.transport_start = state_.clock;
            iv.setup_start = state_.clock + t;
            iv.proc_start = state_.clock + t + s;
            iv.end = state_.clock + total;
            iv.setup_from = from;
            iv.setup_to = op.setup;
            schedule_.intervals.push_back(iv);
            machine_busy_[op.machine] += iv.end - iv.setup_start;
            setup_total_ += iv.proc_start - iv.setup_start;
            result.events.push_back("t=" + std::to_string(state_.clock) + " dispatch " + spec.name + " to " +
                                    inst.machines[op.machine].name);
            break;
        }
        case ActionKind::Presetup: {
            auto& ms = state_.machines[action.machine];
            const Minutes duration = setup_time(inst.machines[action.machine], ms.current_setup, action.setup);
            ScheduledInterval iv;
            iv.kind = IntervalKind::Setup;
            iv.machine = action.machine;
            iv.transport_start = iv.setup_start = state_.clock;
            iv.proc_start = iv.end = state_.clock + duration;
            iv.setup_from = ms.current_setup;
            iv.setup_to = action.setup;
            schedule_.intervals.push_back(iv);
            machine_busy_[action.machine] += iv.end - iv.setup_start;
            setup_total_ += iv.proc_start - iv.setup_start;
            ms.current_setup = action.setup;
            if (duration > 0.0) {
                ms.busy_until = state_.clock + duration;
                push_event({state_.clock + duration, action.machine});
            }
            break;
        }
        case ActionKind::Noop: {
            sample_buffers();
            const Minutes next = state_.events.front().time;
            const Minutes advance = next - state_.clock;
            const int blocked = blocked_job_count();
            result.reward -= config_.w_time * advance + config_.w_block * blocked * advance;
            state_.clock = next;
            fire_events_at(next, result);
            break;
        }
    }

    ++state_.steps;
    const bool all_done = completed_ == inst.job_count();
    if (all_done) {
        state_.done = true;
    } else {
        refresh_mask();
        if (state_.events.empty() && !any_assign_eligible()) {
            state_.done = true;
            state_.deadlocked = true;
            result.reward -= config_.w_deadlock;
            result.events.push_back("t=" + std::to_string(state_.clock) + " deadlock");
        }
    }
    if (state_.done) {
        sample_buffers();
        mask_.assign(space_.size(), false);
    }

    result.observation = observe();
    result.done = state_.done;
    result.mask = mask_;
    return result;
}

Observation Environment::observe() const {
    const auto& inst = *instance_;
    Observation obs;
    const int m = inst.machine_count();
    const int n = inst.job_count();
    obs.machine_info.assign(3, std::vector<double>(m, 0.0));
    for (int k = 0; k < m; ++k) {
        const auto& ms = state_.machines[k];
        if (ms.current_job != kNone) {
            obs.machine_info[0][k] = ms.current_job + 1;
            obs.machine_info[1][k] = *ms.busy_until - state_.clock;
        }
        obs.machine_info[2][k] = ms.current_setup;
    }
    obs.job_info.assign(2, std::vector<double>(n, 0.0));
    for (int j = 0; j < n; ++j) {
        obs.job_info[0][j] = job_volume_at(inst.jobs[j], state_.jobs[j].next_op_index);
        obs.job_info[1][j] = inst.jobs[j].deadline - state_.clock;
    }
    obs.buffer_info = state_.buffer_load;
    return obs;
}

Kpis Environment::kpis() const {
    Kpis k;
    for (const auto& iv : schedule_.intervals)
        if (iv.kind == IntervalKind::Process) k.makespan = std::max(k.makespan, iv.end);
    k.total_tardiness = tardiness_;
    k.tardy_jobs = tardy_jobs_;
    k.peak_buffer = peak_buffer_;
    k.machine_utilization.assign(machine_busy_.size(), 0.0);
    if (k.makespan > 0.0)
        for (std::size_t i = 0; i < machine_busy_.size(); ++i) k.machine_utilization[i] = machine_busy_[i] / k.makespan;
    k.setup_time_total = setup_total_;
    k.completed_jobs = completed_;
    return k;
}

std::vector<std::int64_t> Environment::canonical_key(bool include_clock) const {
    std::vector<std::int64_t> key;
    key.reserve(state_.jobs.size() + 3 * state_.machines.size() + state_.buffer_load.size() + 1);
    for (const auto& js : state_.jobs) key.push_back(js.next_op_index);
    for (const auto& ms : state_.machines) {
        key.push_back(ms.current_setup);
        key.push_back(ms.busy_until ? ms.current_job : -2);
        key.push_back(ms.busy_until ? quantize(*ms.busy_until - state_.clock) : 0);
    }
    for (double load : state_.buffer_load) key.push_back(quantize(load));
    if (include_clock) key.push_back(quantize(state_.clock));
    return key;
}

double Trajectory::discounted_return(double gamma) const {
    double total = 0.0;
    double discount = 1.0;
    for (const auto& s : steps) {
        total += discount * s.reward;
        discount *= gamma;
    }
    return total;
}

}  // namespace jobshop
