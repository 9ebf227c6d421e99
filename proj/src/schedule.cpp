#include "jobshop/schedule.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace jobshop {

namespace {

// Duration checks use a looser tolerance than event ordering: a batch time is
// a product that may carry a few ulps of rounding.
constexpr double kDurationEps = 1e-6;

std::string num(double v) { return format_number(v); }

int kind_rank(IntervalKind kind) {
    switch (kind) {
        case IntervalKind::Transport: return 0;
        case IntervalKind::Setup: return 1;
        case IntervalKind::Process: return 2;
    }
    return 3;
}

std::string job_label(const Instance& inst, JobId j) {
    return j >= 0 && j < inst.job_count() ? inst.jobs[j].name : "-";
}

std::string machine_label(const Instance& inst, MachineId m) {
    return m >= 0 && m < inst.machine_count() ? inst.machines[m].name : "M?";
}

void check_references(const Instance& inst, const Schedule& schedule) {
    if (schedule.completion.size() != inst.jobs.size())
        throw ScheduleError("schedule does not match instance: completion vector has " +
                                std::to_string(schedule.completion.size()) + " entries for " +
                                std::to_string(inst.jobs.size()) + " jobs",
                            {});
    for (const auto& iv : schedule.intervals) {
        if (iv.machine < 0 || iv.machine >= inst.machine_count())
            throw ScheduleError("schedule does not match instance: unknown machine " + std::to_string(iv.machine), {});
        if (iv.kind == IntervalKind::Transport)
            throw ScheduleError("schedule records must be operations or pre-setups", {});
        if (iv.kind == IntervalKind::Process) {
            if (iv.job < 0 || iv.job >= inst.job_count())
                throw ScheduleError("schedule does not match instance: unknown job " + std::to_string(iv.job), {});
            if (iv.op_index < 0 || iv.op_index >= inst.jobs[iv.job].op_count())
                throw ScheduleError("schedule does not match instance: unknown operation", {});
        }
        const int count = inst.machines[iv.machine].setup_count();
        if (iv.setup_from < 0 || iv.setup_from >= count || iv.setup_to < 0 || iv.setup_to >= count)
            throw ScheduleError("schedule does not match instance: unknown setup id", {});
    }
}

// Per job, operation index -> indices of its Process records.
std::vector<std::map<int, std::vector<std::size_t>>> process_records(const Instance& inst, const Schedule& schedule) {
    std::vector<std::map<int, std::vector<std::size_t>>> by_job(inst.jobs.size());
    for (std::size_t i = 0; i < schedule.intervals.size(); ++i) {
        const auto& iv = schedule.intervals[i];
        if (iv.kind == IntervalKind::Process) by_job[iv.job][iv.op_index].push_back(i);
    }
    return by_job;
}

struct BufferDelta {
    Minutes time;
    int phase;  // 0 shrink at completion, 1 release at dispatch, 2 reserve at dispatch
    MachineId buffer;
    Volume delta;
};

}  // namespace

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

const char* to_string(IntervalKind kind) {
    switch (kind) {
        case IntervalKind::Setup: return "SETUP";
        case IntervalKind::Transport: return "TRANSPORT";
        case IntervalKind::Process: return "PROCESS";
    }
    return "?";
}

const char* to_string(ViolationCode code) {
    switch (code) {
        case ViolationCode::Overlap: return "OVERLAP";
        case ViolationCode::Sequence: return "SEQUENCE";
        case ViolationCode::SetupMismatch: return "SETUP_MISMATCH";
        case ViolationCode::BufferOverflow: return "BUFFER_OVERFLOW";
        case ViolationCode::TransportUnderrun: return "TRANSPORT_UNDERRUN";
        case ViolationCode::Preemption: return "PREEMPTION";
    }
    return "?";
}

std::vector<Segment> Schedule::segments() const {
    std::vector<Segment> out;
    for (const auto& iv : intervals) {
        if (iv.kind == IntervalKind::Process) {
            if (iv.setup_start > iv.transport_start)
                out.push_back({IntervalKind::Transport, iv.job, iv.op_index, iv.machine, iv.transport_start, iv.setup_start});
            if (iv.proc_start > iv.setup_start)
                out.push_back({IntervalKind::Setup, iv.job, iv.op_index, iv.machine, iv.setup_start, iv.proc_start});
            out.push_back({IntervalKind::Process, iv.job, iv.op_index, iv.machine, iv.proc_start, iv.end});
        } else if (iv.proc_start > iv.setup_start) {
            out.push_back({IntervalKind::Setup, kNone, kNone, iv.machine, iv.setup_start, iv.proc_start});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Segment& a, const Segment& b) {
        if (a.machine != b.machine) return a.machine < b.machine;
        if (a.start != b.start) return a.start < b.start;
        if (kind_rank(a.kind) != kind_rank(b.kind)) return kind_rank(a.kind) < kind_rank(b.kind);
        return a.job < b.job;
    });
    return out;
}

BufferTrace replay_buffers(const Instance& inst, const Schedule& schedule) {
    check_references(inst, schedule);
    const auto by_job = process_records(inst, schedule);
    std::vector<Volume> load = initial_buffer_loads(inst);
    std::vector<BufferDelta> deltas;

    for (std::size_t j = 0; j < inst.jobs.size(); ++j) {
        const auto& job = inst.jobs[j];
        Volume held = job.ops.front().volume;
        MachineId at = job.ops.front().machine;
        for (int k = 0; k < job.op_count(); ++k) {
            auto it = by_job[j].find(k);
            if (it == by_job[j].end()) break;
            const auto& iv = schedule.intervals[it->second.front()];
            const auto& op = job.ops[k];
            if (k > 0) {
                deltas.push_back({iv.transport_start, 1, at, -held});
                deltas.push_back({iv.transport_start, 2, op.machine, op.volume});
                held = op.volume;
                at = op.machine;
            }
            const Volume after = k + 1 < job.op_count() ? std::min(held, job.ops[k + 1].volume) : 0.0;
            if (after != held) deltas.push_back({iv.end, 0, at, after - held});
            held = after;
        }
    }

    std::stable_sort(deltas.begin(), deltas.end(), [](const BufferDelta& a, const BufferDelta& b) { return a.time < b.time; });

    BufferTrace trace;
    trace.times.push_back(0.0);
    trace.loads.push_back(load);
    std::size_t i = 0;
    while (i < deltas.size()) {
        std::size_t end = i;
        const Minutes t0 = deltas[i].time;
        while (end < deltas.size() && deltas[end].time - t0 <= kTimeEps) ++end;
        std::stable_sort(deltas.begin() + static_cast<long>(i), deltas.begin() + static_cast<long>(end),
                         [](const BufferDelta& a, const BufferDelta& b) { return a.phase < b.phase; });
        for (std::size_t d = i; d < end; ++d) load[deltas[d].buffer] += deltas[d].delta;
        if (time_eq(trace.times.back(), t0)) {
            trace.loads.back() = load;
        } else {
            trace.times.push_back(t0);
            trace.loads.push_back(load);
        }
        i = end;
    }
    return trace;
}

std::vector<Violation> validate_schedule(const Instance& inst, const Schedule& schedule) {
    check_references(inst, schedule);
    std::vector<Violation> out;
    auto report = [&out](ViolationCode code, std::string detail, Minutes time) {
        out.push_back({code, std::move(detail), time});
    };
    const auto by_job = process_records(inst, schedule);

    for (const auto& iv : schedule.intervals) {
        if (!(time_le(iv.transport_start, iv.setup_start) && time_le(iv.setup_start, iv.proc_start) &&
              time_le(iv.proc_start, iv.end)) || iv.transport_start < -kTimeEps)
            report(ViolationCode::Sequence, "interval on " + machine_label(inst, iv.machine) + " has unordered bounds",
                   iv.transport_start);
    }

    // Operation order, single contiguous processing, transport gaps.
    for (std::size_t j = 0; j < inst.jobs.size(); ++j) {
        const auto& job = inst.jobs[j];
        const ScheduledInterval* prev = nullptr;
        int present = 0;
        bool gap = false;
        for (int k = 0; k < job.op_count(); ++k) {
            auto it = by_job[j].find(k);
            if (it == by_job[j].end()) {
                gap = true;
                continue;
            }
            const std::string label = job.name + " op " + std::to_string(k + 1);
            if (gap) report(ViolationCode::Sequence, label + " scheduled after a missing predecessor", 0.0);
            ++present;
            if (it->second.size() > 1)
                report(ViolationCode::Preemption, label + " split into " + std::to_string(it->second.size()) + " pieces",
                       schedule.intervals[it->second[1]].proc_start);
            const auto& iv = schedule.intervals[it->second.front()];
            const auto& op = job.ops[k];
            if (iv.machine != op.machine)
                report(ViolationCode::Sequence, label + " runs on " + machine_label(inst, iv.machine) + " instead of " +
                                                    machine_label(inst, op.machine), iv.proc_start);
            const Minutes expected = job.batch_size * op.unit_time;
            if (std::abs((iv.end - iv.proc_start) - expected) > kDurationEps)
                report(ViolationCode::Preemption, label + " processes for " + num(iv.end - iv.proc_start) +
                                                      " min, batch needs " + num(expected), iv.proc_start);
            if (prev) {
                if (time_lt(iv.transport_start, prev->end))
                    report(ViolationCode::Sequence, label + " leaves before its predecessor finished", iv.transport_start);
                const Minutes need = transport_time(inst, prev->machine, iv.machine);
                if (iv.proc_start - prev->end < need - kDurationEps)
                    report(ViolationCode::TransportUnderrun, label + " starts " + num(iv.proc_start - prev->end) +
                                                                 " min after predecessor, transport needs " + num(need),
                           iv.proc_start);
            }
            prev = &iv;
        }
        const bool complete = present == job.op_count() && !gap;
        if (schedule.completion[j].has_value()) {
            if (!complete)
                report(ViolationCode::Sequence, job.name + " marked complete with operations missing", *schedule.completion[j]);
            else if (!time_eq(*schedule.completion[j], prev->end) && std::abs(*schedule.completion[j] - prev->end) > kDurationEps)
                report(ViolationCode::Sequence, job.name + " completion time disagrees with its last operation",
                       *schedule.completion[j]);
        }
    }

    // Machine exclusivity and setup state, per machine lane.
    std::vector<std::vector<const ScheduledInterval*>> lanes(inst.machines.size());
    for (const auto& iv : schedule.intervals) lanes[iv.machine].push_back(&iv);
    for (std::size_t m = 0; m < lanes.size(); ++m) {
        auto& lane = lanes[m];
        std::stable_sort(lane.begin(), lane.end(), [](const ScheduledInterval* a, const ScheduledInterval* b) {
            if (a->setup_start != b->setup_start) return a->setup_start < b->setup_start;
            return kind_rank(a->kind) < kind_rank(b->kind);
        });
        const auto& machine = inst.machines[m];
        Minutes busy_until = 0.0;
        const ScheduledInterval* holder = nullptr;
        SetupId current = kNeutralSetup;
        for (const auto* iv : lane) {
            if (holder && time_lt(iv->setup_start, busy_until))
                report(ViolationCode::Overlap, "on " + machine.name + ": " + job_label(inst, iv->job) + " overlaps " +
                                                   job_label(inst, holder->job), iv->setup_start);
            if (iv->end > busy_until || !holder) {
                busy_until = std::max(busy_until, iv->end);
                holder = iv;
            }
            if (iv->setup_from != current)
                report(ViolationCode::SetupMismatch, "on " + machine.name + ": change starts from s" +
                                                         std::to_string(iv->setup_from) + " but machine is in s" +
                                                         std::to_string(current), iv->setup_start);
            const Minutes need = setup_time(machine, iv->setup_from, iv->setup_to);
            if (iv->proc_start - iv->setup_start < need - kDurationEps)
                report(ViolationCode::SetupMismatch, "on " + machine.name + ": setup s" + std::to_string(iv->setup_from) +
                                                         "->s" + std::to_string(iv->setup_to) + " needs " + num(need) +
                                                         " min", iv->setup_start);
            if (iv->kind == IntervalKind::Process) {
                const auto& op = inst.jobs[iv->job].ops[iv->op_index];
                if (iv->setup_to != op.setup)
                    report(ViolationCode::SetupMismatch, "on " + machine.name + ": " + inst.jobs[iv->job].name +
                                                             " needs s" + std::to_string(op.setup) + ", machine in s" +
                                                             std::to_string(iv->setup_to), iv->proc_start);
            }
            current = iv->setup_to;
        }
    }

    const auto trace = replay_buffers(inst, schedule);
    std::vector<bool> reported(inst.buffers.size(), false);
    for (std::size_t s = 0; s < trace.times.size(); ++s) {
        for (std::size_t k = 0; k < inst.buffers.size(); ++k) {
            if (!reported[k] && trace.loads[s][k] > inst.buffers[k].capacity + kDurationEps) {
                reported[k] = true;
                report(ViolationCode::BufferOverflow, "buffer " + std::to_string(k + 1) + " holds " +
                                                          num(trace.loads[s][k]) + " > capacity " +
                                                          num(inst.buffers[k].capacity), trace.times[s]);
            }
        }
    }
    return out;
}

Kpis compute_kpis(const Instance& inst, const Schedule& schedule) {
    auto violations = validate_schedule(inst, schedule);
    if (!violations.empty()) {
        std::string what = "schedule is infeasible:";
        for (const auto& v : violations) what += std::string(" ") + to_string(v.code) + " (" + v.detail + ")";
        throw ScheduleError(what, std::move(violations));
    }
    Kpis k;
    for (const auto& iv : schedule.intervals)
        if (iv.kind == IntervalKind::Process) k.makespan = std::max(k.makespan, iv.end);
    for (std::size_t j = 0; j < inst.jobs.size(); ++j) {
        if (!schedule.completion[j]) continue;
        ++k.completed_jobs;
        const Minutes tardy = std::max(0.0, *schedule.completion[j] - inst.jobs[j].deadline);
        if (tardy > kTimeEps) {
            k.total_tardiness += tardy;
            ++k.tardy_jobs;
        }
    }
    const auto trace = replay_buffers(inst, schedule);
    k.peak_buffer.assign(inst.buffers.size(), 0.0);
    for (const auto& loads : trace.loads)
        for (std::size_t b = 0; b < loads.size(); ++b) k.peak_buffer[b] = std::max(k.peak_buffer[b], loads[b]);
    std::vector<Minutes> busy(inst.machines.size(), 0.0);
    for (const auto& iv : schedule.intervals) {
        busy[iv.machine] += iv.end - iv.setup_start;
        k.setup_time_total += iv.proc_start - iv.setup_start;
    }
    k.machine_utilization.assign(busy.size(), 0.0);
    if (k.makespan > 0.0)
        for (std::size_t m = 0; m < busy.size(); ++m) k.machine_utilization[m] = busy[m] / k.makespan;
    return k;
}

std::string render_gantt(const Instance& inst, const Schedule& schedule, GanttFormat format) {
    const auto segments = schedule.segments();
    Minutes horizon = 0.0;
    for (const auto& s : segments) horizon = std::max(horizon, s.end);

    if (format == GanttFormat::Text) {
        std::ostringstream out;
        out << "gantt horizon=" << num(horizon) << "\n";
        for (int m = 0; m < inst.machine_count(); ++m) {
            out << inst.machines[m].name << ":";
            for (const auto& s : segments) {
                if (s.machine != m) continue;
                out << " [" << num(s.start) << "," << num(s.end) << ") " << to_string(s.kind);
                if (s.job != kNone) out << " " << job_label(inst, s.job) << "/" << (s.op_index + 1);
            }
            out << "\n";
        }
        return out.str();
    }

    static constexpr std::array<const char*, 8> palette = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                                           "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};
    constexpr double lane_h = 30.0, left = 60.0, top = 30.0, plot_w = 800.0;
    const double scale = horizon > 0.0 ? plot_w / horizon : 1.0;
    const double height = top + lane_h * inst.machine_count() + 30.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + plot_w + 20.0) << "\" height=\""
        << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<defs><pattern id=\"setup\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
           "patternTransform=\"rotate(45)\"><rect width=\"3\" height=\"6\" fill=\"#999\"/></pattern></defs>\n";
    svg << "<text x=\"" << num(left) << "\" y=\"18\">horizon " << num(horizon) << " min</text>\n";
    for (int m = 0; m < inst.machine_count(); ++m) {
        const double y = top + lane_h * m;
        svg << "<g class=\"lane\" data-machine=\"" << inst.machines[m].name << "\">\n";
        svg << "<text x=\"5\" y=\"" << num(y + 19.0) << "\">" << inst.machines[m].name << "</text>\n";
        svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(y + lane_h) << "\" x2=\"" << num(left + plot_w)
            << "\" y2=\"" << num(y + lane_h) << "\" stroke=\"#ddd\"/>\n";
        for (const auto& s : segments) {
            if (s.machine != m) continue;
            const double x = left + s.start * scale;
            const double w = (s.end - s.start) * scale;
            std::string fill = "url(#setup)";
            std::string extra;
            if (s.kind == IntervalKind::Process) fill = palette[static_cast<std::size_t>(s.job) % palette.size()];
            if (s.kind == IntervalKind::Transport) {
                fill = "none";
                extra = " stroke=\"#555\" stroke-dasharray=\"3,2\"";
            }
            svg << "<rect class=\"" << to_string(s.kind) << "\" x=\"" << num(x) << "\" y=\"" << num(y + 4.0)
                << "\" width=\"" << num(w) << "\" height=\"" << num(lane_h - 8.0) << "\" fill=\"" << fill << "\""
                << extra << " data-start=\"" << num(s.start) << "\" data-end=\"" << num(s.end) << "\"><title>"
                << to_string(s.kind) << " " << job_label(inst, s.job) << " [" << num(s.start) << "," << num(s.end)
                << ")</title></rect>\n";
            if (s.kind == IntervalKind::Process && w > 20.0)
                svg << "<text x=\"" << num(x + 3.0) << "\" y=\"" << num(y + 19.0) << "\" fill=\"#fff\">"
                    << job_label(inst, s.job) << "</text>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string schedule_to_csv(const Instance& inst, const Schedule& schedule) {
    std::ostringstream out;
    out << "machine,kind,job,op,start,end\n";
    for (const auto& s : schedule.segments()) {
        out << machine_label(inst, s.machine) << "," << to_string(s.kind) << "," << job_label(inst, s.job) << ","
            << (s.op_index == kNone ? 0 : s.op_index + 1) << "," << num(s.start) << "," << num(s.end) << "\n";
    }
    return out.str();
}

}  // namespace jobshop
