#include "jobshop/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "jobshop/neural.hpp"
#include "jobshop/random.hpp"

namespace jobshop {

namespace {

std::string at(const std::string& prefix, std::size_t i) { return prefix + "[" + std::to_string(i) + "]"; }
std::string dot(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

const json& member(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw InstanceError(path.empty() ? "$" : path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw InstanceError(dot(path, key), "missing field");
    return *it;
}

double number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    // tolerate "0,04" style decimal commas
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        std::replace(s.begin(), s.end(), ',', '.');
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (!s.empty() && end == s.c_str() + s.size()) return d;
    }
    throw InstanceError(path, "expected a number");
}

int integer(const json& v, const std::string& path) {
    const double d = number(v, path);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw InstanceError(path, "expected an integer");
    return static_cast<int>(d);
}

std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) throw InstanceError(path, "expected a string");
    return v.get<std::string>();
}

const json& array(const json& v, const std::string& path) {
    if (!v.is_array()) throw InstanceError(path, "expected an array");
    return v;
}

std::vector<std::vector<Minutes>> matrix(const json& v, const std::string& path) {
    std::vector<std::vector<Minutes>> out;
    for (std::size_t r = 0; r < array(v, path).size(); ++r) {
        const std::string row_path = at(path, r);
        std::vector<Minutes> row;
        for (std::size_t c = 0; c < array(v[r], row_path).size(); ++c) row.push_back(number(v[r][c], at(row_path, c)));
        out.push_back(std::move(row));
    }
    return out;
}

void check_header(const json& doc, const char* format, int version) {
    if (!doc.is_object()) throw InstanceError("$", "expected an object");
    if (doc.contains("format") && doc["format"] != format)
        throw InstanceError("format", std::string("expected \"") + format + "\"");
    if (doc.contains("version")) {
        const int v = integer(doc["version"], "version");
        if (v < 1 || v > version) throw InstanceError("version", "unsupported version " + std::to_string(v));
    }
}

struct Plant {
    std::vector<Machine> machines;
    std::vector<BufferSpec> buffers;
    std::vector<std::vector<Minutes>> transport;
};

MachineId machine_ref(const json& v, const std::vector<Machine>& machines, const std::string& path) {
    if (v.is_string()) {
        const std::string name = v.get<std::string>();
        for (const auto& m : machines)
            if (m.name == name) return m.id;
        throw InstanceError(path, "unknown machine \"" + name + "\"");
    }
    const int k = integer(v, path);
    if (k < 0 || k >= static_cast<int>(machines.size())) throw InstanceError(path, "unknown machine");
    return k;
}

SetupId setup_ref(const json& v, const std::string& path) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "neutral") return kNeutralSetup;
        if (s.size() > 1 && (s[0] == 's' || s[0] == 'S')) return integer(json(s.substr(1)), path);
    }
    return integer(v, path);
}

Plant parse_plant(const json& doc) {
    Plant plant;
    const json& machines = array(member(doc, "machines", ""), "machines");
    for (std::size_t k = 0; k < machines.size(); ++k) {
        const std::string path = at("machines", k);
        const json& mj = machines[k];
        if (!mj.is_object()) throw InstanceError(path, "expected an object");
        Machine m;
        m.id = static_cast<int>(k);
        m.name = mj.contains("name") ? text(mj["name"], path + ".name") : "M" + std::to_string(k + 1);
        if (mj.contains("setup_times")) m.setup_time = matrix(mj["setup_times"], path + ".setup_times");
        plant.machines.push_back(std::move(m));
    }
    plant.transport = matrix(member(doc, "transport", ""), "transport");
    const json& buffers = array(member(doc, "buffers", ""), "buffers");
    for (std::size_t k = 0; k < buffers.size(); ++k) {
        const std::string path = at("buffers", k);
        BufferSpec b;
        b.machine = buffers[k].is_object() && buffers[k].contains("machine")
                        ? machine_ref(buffers[k]["machine"], plant.machines, path + ".machine")
                        : static_cast<int>(k);
        b.capacity = number(member(buffers[k], "capacity", path), path + ".capacity");
        plant.buffers.push_back(b);
    }
    // allow buffers listed in any order
    std::stable_sort(plant.buffers.begin(), plant.buffers.end(),
                     [](const BufferSpec& a, const BufferSpec& b) { return a.machine < b.machine; });
    return plant;
}

std::vector<Operation> parse_ops(const json& v, const std::vector<Machine>& machines, const std::string& path) {
    std::vector<Operation> ops;
    for (std::size_t o = 0; o < array(v, path).size(); ++o) {
        const std::string op_path = at(path, o);
        const json& oj = v[o];
        Operation op;
        op.machine = machine_ref(member(oj, "machine", op_path), machines, op_path + ".machine");
        op.setup = oj.contains("machine_setup") ? setup_ref(oj["machine_setup"], op_path + ".machine_setup") : 0;
        op.unit_time = number(member(oj, "machining_time", op_path), op_path + ".machining_time");
        op.volume = number(member(oj, "volume", op_path), op_path + ".volume");
        ops.push_back(op);
    }
    return ops;
}

json plant_json(const std::vector<Machine>& machines, const std::vector<BufferSpec>& buffers,
                const std::vector<std::vector<Minutes>>& transport) {
    json out = json::object();
    json mj = json::array();
    for (const auto& m : machines) mj.push_back({{"name", m.name}, {"setup_times", m.setup_time}});
    out["machines"] = mj;
    out["transport"] = transport;
    json bj = json::array();
    for (const auto& b : buffers) bj.push_back({{"machine", machines.at(b.machine).name}, {"capacity", b.capacity}});
    out["buffers"] = bj;
    return out;
}

json ops_json(const std::vector<Operation>& ops, const std::vector<Machine>& machines) {
    json out = json::array();
    for (const auto& op : ops)
        out.push_back({{"machine", machines.at(op.machine).name},
                       {"machine_setup", op.setup},
                       {"machining_time", op.unit_time},
                       {"volume", op.volume}});
    return out;
}

// Rethrows instance-invariant failures from validate_instance with paths that
// match the document (operation setup is "machine_setup" there).
void validate_with_doc_paths(const Instance& inst) {
    try {
        validate_instance(inst);
    } catch (const InstanceError& e) {
        std::string path = e.path();
        const std::string suffix = ".setup";
        if (path.size() > suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
            throw InstanceError(path.substr(0, path.size() - suffix.size()) + ".machine_setup", e.what());
        throw;
    }
}

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

// ---- instances -------------------------------------------------------------

Instance parse_instance(const json& doc) {
    check_header(doc, "jobshop-instance", kInstanceFormatVersion);
    Plant plant = parse_plant(doc);
    Instance inst;
    inst.name = doc.contains("name") ? text(doc["name"], "name") : "instance";
    inst.machines = std::move(plant.machines);
    inst.buffers = std::move(plant.buffers);
    inst.transport = std::move(plant.transport);
    const json& jobs = array(member(doc, "jobs", ""), "jobs");
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const std::string path = at("jobs", j);
        const json& jj = jobs[j];
        Job job;
        job.id = static_cast<int>(j);
        job.name = jj.is_object() && jj.contains("name") ? text(jj["name"], path + ".name") : "J" + std::to_string(j + 1);
        job.batch_size = integer(member(jj, "quantity", path), path + ".quantity");
        job.deadline = number(member(jj, "deadline", path), path + ".deadline");
        job.ops = parse_ops(member(jj, "operations", path), inst.machines, path + ".operations");
        inst.jobs.push_back(std::move(job));
    }
    validate_with_doc_paths(inst);
    return inst;
}

Instance parse_instance_text(const std::string& content) {
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw InstanceError("$", std::string("malformed document: ") + e.what());
    }
    return parse_instance(doc);
}

json serialize_instance(const Instance& inst) {
    json out = plant_json(inst.machines, inst.buffers, inst.transport);
    out["format"] = "jobshop-instance";
    out["version"] = kInstanceFormatVersion;
    out["name"] = inst.name;
    json jobs = json::array();
    for (const auto& job : inst.jobs)
        jobs.push_back({{"name", job.name},
                        {"quantity", job.batch_size},
                        {"deadline", job.deadline},
                        {"operations", ops_json(job.ops, inst.machines)}});
    out["jobs"] = jobs;
    return out;
}

Instance load_instance(const std::string& name_or_path) {
    if (name_or_path == "example3x3") return example_instance();
    std::string content;
    try {
        content = read_file(name_or_path);
    } catch (const std::exception& e) {
        throw InstanceError("$", e.what());
    }
    return parse_instance_text(content);
}

std::string instance_hash(const Instance& inst) {
    const std::string canonical = serialize_instance(inst).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- catalog and orders ----------------------------------------------------

Catalog parse_catalog(const json& doc) {
    check_header(doc, "jobshop-catalog", kInstanceFormatVersion);
    Plant plant = parse_plant(doc);
    Catalog cat;
    cat.machines = std::move(plant.machines);
    cat.buffers = std::move(plant.buffers);
    cat.transport = std::move(plant.transport);
    const json& articles = array(member(doc, "articles", ""), "articles");
    for (std::size_t a = 0; a < articles.size(); ++a) {
        const std::string path = at("articles", a);
        ArticleSpec art;
        art.article_id = text(member(articles[a], "id", path), path + ".id");
        const json& comps = array(member(articles[a], "components", path), path + ".components");
        if (comps.empty()) throw InstanceError(path + ".components", "an article needs at least one component");
        for (std::size_t c = 0; c < comps.size(); ++c) {
            const std::string cpath = at(path + ".components", c);
            ComponentSpec comp;
            comp.name = text(member(comps[c], "name", cpath), cpath + ".name");
            comp.quantity_per_article =
                comps[c].contains("quantity_per_article")
                    ? integer(comps[c]["quantity_per_article"], cpath + ".quantity_per_article")
                    : 1;
            if (comp.quantity_per_article < 1)
                throw InstanceError(cpath + ".quantity_per_article", "must be at least 1");
            comp.ops = parse_ops(member(comps[c], "operations", cpath), cat.machines, cpath + ".operations");
            art.components.push_back(std::move(comp));
        }
        cat.articles.push_back(std::move(art));
    }
    return cat;
}

json serialize_catalog(const Catalog& cat) {
    json out = plant_json(cat.machines, cat.buffers, cat.transport);
    out["format"] = "jobshop-catalog";
    out["version"] = kInstanceFormatVersion;
    json arts = json::array();
    for (const auto& art : cat.articles) {
        json comps = json::array();
        for (const auto& c : art.components)
            comps.push_back({{"name", c.name},
                             {"quantity_per_article", c.quantity_per_article},
                             {"operations", ops_json(c.ops, cat.machines)}});
        arts.push_back({{"id", art.article_id}, {"components", comps}});
    }
    out["articles"] = arts;
    return out;
}

std::vector<Order> parse_orders(const json& doc) {
    const json& list = doc.is_object() ? member(doc, "orders", "") : doc;
    const std::string base = doc.is_object() ? "orders" : "";
    std::vector<Order> orders;
    for (std::size_t i = 0; i < array(list, base.empty() ? "$" : base).size(); ++i) {
        const std::string path = base.empty() ? "[" + std::to_string(i) + "]" : at(base, i);
        Order o;
        o.article_id = text(member(list[i], "article", path), path + ".article");
        o.quantity = integer(member(list[i], "quantity", path), path + ".quantity");
        if (o.quantity < 1) throw InstanceError(path + ".quantity", "quantity must be at least 1");
        o.deadline = number(member(list[i], "deadline", path), path + ".deadline");
        if (!std::isfinite(o.deadline) || o.deadline < 0.0)
            throw InstanceError(path + ".deadline", "deadline must be non-negative");
        orders.push_back(o);
    }
    return orders;
}

std::vector<Job> expand_orders(const std::vector<ArticleSpec>& catalog, const std::vector<Order>& orders) {
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        const Order& order = orders[i];
        if (order.quantity < 1) throw DomainError("order quantity must be at least 1");
        auto it = std::find_if(catalog.begin(), catalog.end(),
                               [&](const ArticleSpec& a) { return a.article_id == order.article_id; });
        if (it == catalog.end()) throw DomainError("unknown article \"" + order.article_id + "\"");
        for (const auto& comp : it->components) {
            Job job;
            job.id = static_cast<int>(jobs.size());
            job.name = order.article_id + "#" + std::to_string(i + 1) + "/" + comp.name;
            job.batch_size = order.quantity * comp.quantity_per_article;
            job.deadline = order.deadline;
            job.ops = comp.ops;
            jobs.push_back(std::move(job));
        }
    }
    return jobs;
}

Instance build_instance(const Catalog& catalog, const std::vector<Order>& orders, std::string name) {
    if (orders.empty()) throw DomainError("order list is empty");
    Instance inst;
    inst.name = std::move(name);
    inst.machines = catalog.machines;
    inst.buffers = catalog.buffers;
    inst.transport = catalog.transport;
    inst.jobs = expand_orders(catalog.articles, orders);
    validate_instance(inst);
    return inst;
}

// ---- generation ------------------------------------------------------------

void GenSpec::validate() const {
    auto int_ok = [](IntRange r, int min) { return r.lo >= min && r.lo <= r.hi; };
    auto real_ok = [](RealRange r, double min) {
        return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo >= min && r.lo <= r.hi;
    };
    if (!int_ok(jobs, 0)) throw DomainError("jobs range must satisfy 0 <= lo <= hi");
    if (!int_ok(machines, 1)) throw DomainError("machines range must satisfy 1 <= lo <= hi");
    if (!int_ok(setups_per_machine, 0)) throw DomainError("setups range must satisfy 0 <= lo <= hi");
    if (!int_ok(batch_size, 1)) throw DomainError("batch size range must satisfy 1 <= lo <= hi");
    if (!real_ok(unit_time, 0.0) || unit_time.lo <= 0.0) throw DomainError("unit time range must be positive");
    if (!real_ok(volume, 0.0) || volume.lo <= 0.0) throw DomainError("volume range must be positive");
    if (!real_ok(transport, 0.0)) throw DomainError("transport range must be non-negative and ordered");
    if (!real_ok(setup_time, 0.0)) throw DomainError("setup time range must be non-negative and ordered");
    if (!real_ok(deadline_slack, 0.0) || deadline_slack.lo <= 0.0) throw DomainError("deadline slack must be positive");
    if (!real_ok(buffer_slack, 1.0)) throw DomainError("buffer slack must be at least 1");
}

Instance generate_instance(const GenSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    auto pick_int = [&](IntRange r) { return r.lo + static_cast<int>(uniform_index(rng, r.hi - r.lo + 1)); };
    auto pick_real = [&](RealRange r) { return uniform_real(rng, r.lo, r.hi); };

    Instance inst;
    inst.name = "gen-" + std::to_string(spec.seed);
    const int n = pick_int(spec.jobs);
    const int m = pick_int(spec.machines);
    for (int k = 0; k < m; ++k) {
        Machine mach;
        mach.id = k;
        mach.name = "M" + std::to_string(k + 1);
        const int setups = pick_int(spec.setups_per_machine) + 1;
        mach.setup_time.assign(setups, std::vector<Minutes>(setups, 0.0));
        for (int a = 0; a < setups; ++a)
            for (int b = 0; b < setups; ++b)
                if (a != b) mach.setup_time[a][b] = std::round(pick_real(spec.setup_time));
        inst.machines.push_back(std::move(mach));
    }
    inst.transport.assign(m, std::vector<Minutes>(m, 0.0));
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) inst.transport[a][b] = inst.transport[b][a] = std::round(pick_real(spec.transport));

    for (int j = 0; j < n; ++j) {
        Job job;
        job.id = j;
        job.name = "J" + std::to_string(j + 1);
        job.batch_size = pick_int(spec.batch_size);
        std::vector<int> route(m);
        std::iota(route.begin(), route.end(), 0);
        for (int i = m - 1; i > 0; --i) std::swap(route[i], route[uniform_index(rng, i + 1)]);
        Volume volume = std::max(0.5, round_to(pick_real(spec.volume), 0.5));
        Minutes bare = 0.0;
        for (int k : route) {
            Operation op;
            op.machine = k;
            const int setups = inst.machines[k].setup_count();
            op.setup = setups > 1 ? 1 + static_cast<int>(uniform_index(rng, setups - 1)) : 0;
            op.unit_time = std::max(0.0001, round_to(pick_real(spec.unit_time), 0.0001));
            op.volume = volume;
            bare += job.batch_size * op.unit_time;
            job.ops.push_back(op);
            // parts lose material as they are machined
            volume = std::max(0.5, round_to(volume * uniform_real(rng, 0.6, 1.0), 0.5));
        }
        job.deadline = std::round(bare * pick_real(spec.deadline_slack));
        inst.jobs.push_back(std::move(job));
    }

    const auto initial = initial_buffer_loads(inst);
    for (int k = 0; k < m; ++k) {
        Volume need = initial[k];
        for (const auto& job : inst.jobs)
            for (const auto& op : job.ops)
                if (op.machine == k) need = std::max(need, op.volume);
        need = std::max(need, 1.0);
        inst.buffers.push_back({k, std::ceil(need * pick_real(spec.buffer_slack))});
    }
    validate_instance(inst);
    return inst;
}

// ---- schedules -------------------------------------------------------------

json kpis_to_json(const Kpis& k) {
    return {{"makespan", k.makespan},
            {"total_tardiness", k.total_tardiness},
            {"tardy_jobs", k.tardy_jobs},
            {"peak_buffer", k.peak_buffer},
            {"machine_utilization", k.machine_utilization},
            {"setup_time_total", k.setup_time_total},
            {"completed_jobs", k.completed_jobs}};
}

json violations_to_json(const std::vector<Violation>& violations) {
    json out = json::array();
    for (const auto& v : violations) out.push_back({{"code", to_string(v.code)}, {"detail", v.detail}, {"time", v.time}});
    return out;
}

json schedule_to_json(const Instance& inst, const Schedule& sched, const std::string& policy) {
    json intervals = json::array();
    for (const auto& iv : sched.intervals) {
        json e = {{"kind", to_string(iv.kind)},
                  {"machine", iv.machine},
                  {"transport_start", iv.transport_start},
                  {"setup_start", iv.setup_start},
                  {"proc_start", iv.proc_start},
                  {"end", iv.end},
                  {"setup_from", iv.setup_from},
                  {"setup_to", iv.setup_to}};
        e["job"] = iv.job;
        e["op_index"] = iv.op_index;
        intervals.push_back(std::move(e));
    }
    json completion = json::array();
    for (const auto& c : sched.completion) completion.push_back(c ? json(*c) : json(nullptr));
    json out = {{"format", "jobshop-schedule"},
                {"version", kScheduleFormatVersion},
                {"instance_hash", instance_hash(inst)},
                {"policy", policy},
                {"intervals", intervals},
                {"completion", completion}};
    const auto violations = validate_schedule(inst, sched);
    out["violations"] = violations_to_json(violations);
    if (violations.empty()) out["kpis"] = kpis_to_json(compute_kpis(inst, sched));
    return out;
}

Schedule schedule_from_json(const json& doc) {
    check_header(doc, "jobshop-schedule", kScheduleFormatVersion);
    Schedule sched;
    const json& ivs = array(member(doc, "intervals", ""), "intervals");
    for (std::size_t i = 0; i < ivs.size(); ++i) {
        const std::string path = at("intervals", i);
        const json& e = ivs[i];
        ScheduledInterval iv;
        const std::string kind = text(member(e, "kind", path), path + ".kind");
        if (kind == "PROCESS") iv.kind = IntervalKind::Process;
        else if (kind == "SETUP") iv.kind = IntervalKind::Setup;
        else throw InstanceError(path + ".kind", "expected PROCESS or SETUP");
        iv.job = e.contains("job") && !e["job"].is_null() ? integer(e["job"], path + ".job") : kNone;
        iv.op_index = e.contains("op_index") && !e["op_index"].is_null() ? integer(e["op_index"], path + ".op_index") : kNone;
        iv.machine = integer(member(e, "machine", path), path + ".machine");
        iv.setup_start = number(member(e, "setup_start", path), path + ".setup_start");
        iv.transport_start = e.contains("transport_start") ? number(e["transport_start"], path + ".transport_start")
                                                           : iv.setup_start;
        iv.proc_start = e.contains("proc_start") ? number(e["proc_start"], path + ".proc_start") : iv.setup_start;
        iv.end = number(member(e, "end", path), path + ".end");
        iv.setup_from = e.contains("setup_from") ? integer(e["setup_from"], path + ".setup_from") : kNeutralSetup;
        iv.setup_to = e.contains("setup_to") ? integer(e["setup_to"], path + ".setup_to") : kNeutralSetup;
        sched.intervals.push_back(iv);
    }
    if (doc.contains("completion")) {
        const json& comp = array(doc["completion"], "completion");
        for (std::size_t j = 0; j < comp.size(); ++j)
            sched.completion.push_back(comp[j].is_null() ? std::nullopt
                                                         : std::optional<Minutes>(number(comp[j], at("completion", j))));
    }
    return sched;
}

json reward_to_json(const RewardConfig& c) {
    return {{"w_time", c.w_time},     {"w_tardy", c.w_tardy},         {"r_complete", c.r_complete},
            {"w_block", c.w_block},   {"w_deadlock", c.w_deadlock},   {"gamma", c.gamma}};
}

RewardConfig reward_from_json(const json& doc) {
    RewardConfig c;
    if (!doc.is_object()) throw InstanceError("reward", "expected an object");
    auto read = [&](const char* key, double& field) {
        if (doc.contains(key)) field = number(doc[key], std::string("reward.") + key);
    };
    read("w_time", c.w_time);
    read("w_tardy", c.w_tardy);
    read("r_complete", c.r_complete);
    read("w_block", c.w_block);
    read("w_deadlock", c.w_deadlock);
    read("gamma", c.gamma);
    c.validate();
    return c;
}

RewardConfig reward_for_goal(const std::string& goal) {
    std::string g;
    for (char c : goal) g.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (g == "makespan") return RewardConfig::makespan_only();
    if (g == "balanced") return RewardConfig{};
    if (g == "tardiness") {
        RewardConfig cfg = RewardConfig::makespan_only();
        cfg.w_time = 0.0;
        cfg.w_tardy = 1.0;
        return cfg;
    }
    throw DomainError("unknown goal \"" + goal + "\" (makespan, tardiness, balanced)");
}

json observation_to_json(const Observation& obs) {
    return {{"machine_info", obs.machine_info}, {"job_info", obs.job_info}, {"buffer_info", obs.buffer_info}};
}

// ---- trajectories ----------------------------------------------------------

std::string trajectory_to_jsonl(const TrajectoryHeader& header, const Trajectory& traj, const ActionSpace& space) {
    std::string out;
    json head = {{"type", "header"},
                 {"format", "jobshop-trajectory"},
                 {"version", 1},
                 {"instance_hash", header.instance_hash},
                 {"policy", header.policy},
                 {"seed", header.seed},
                 {"reward", reward_to_json(header.reward)},
                 {"features", {{"presetup", header.features.presetup}}},
                 {"observation", observation_to_json(traj.initial)}};
    out += head.dump() + "\n";
    for (const auto& s : traj.steps) {
        json line = {{"type", "step"},
                     {"step", s.index},
                     {"action", s.action},
                     {"action_name", to_string(space.decode(s.action))},
                     {"reward", s.reward},
                     {"clock", s.clock},
                     {"observation", observation_to_json(s.observation)}};
        out += line.dump() + "\n";
    }
    return out;
}

std::pair<TrajectoryHeader, std::vector<int>> trajectory_actions_from_jsonl(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    TrajectoryHeader header;
    std::vector<int> actions;
    bool seen_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string path = "line " + std::to_string(lineno);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InstanceError(path, std::string("malformed record: ") + e.what());
        }
        const std::string type = text(member(rec, "type", path), path + ".type");
        if (type == "header") {
            header.instance_hash = text(member(rec, "instance_hash", path), path + ".instance_hash");
            header.policy = text(member(rec, "policy", path), path + ".policy");
            header.seed = member(rec, "seed", path).get<std::uint64_t>();
            header.reward = reward_from_json(member(rec, "reward", path));
            header.features.presetup = rec.contains("features") && rec["features"].value("presetup", false);
            seen_header = true;
        } else if (type == "step") {
            actions.push_back(integer(member(rec, "action", path), path + ".action"));
        }
    }
    if (!seen_header) throw InstanceError("$", "trajectory has no header record");
    return {header, actions};
}

// ---- policies --------------------------------------------------------------

json policy_to_json(const Policy& policy, const Features& features) {
    json out = {{"format", "jobshop-policy"},
                {"version", kPolicyFormatVersion},
                {"kind", to_string(policy.kind())},
                {"features", {{"presetup", features.presetup}}}};
    if (auto q = dynamic_cast<const TabularQPolicy*>(&policy)) {
        out["action_count"] = q->action_count();
        out["include_clock"] = q->include_clock();
        std::vector<std::pair<std::vector<std::int64_t>, std::vector<double>>> rows(q->table().begin(), q->table().end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        json entries = json::array();
        for (const auto& [key, values] : rows) entries.push_back({{"key", key}, {"q", values}});
        out["table"] = entries;
    } else if (auto nn = dynamic_cast<const NeuralPolicy*>(&policy)) {
        const auto& enc = nn->encoder();
        out["encoder"] = {{"machines", enc.machines},
                          {"jobs", enc.jobs},
                          {"setup_counts", enc.setup_counts},
                          {"horizon", enc.horizon},
                          {"volume_scale", enc.volume_scale}};
        out["network"] = {{"inputs", nn->net().inputs()},
                          {"hidden", nn->net().hidden()},
                          {"actions", nn->net().actions()},
                          {"params", nn->net().params()}};
    }
    return out;
}

std::unique_ptr<Policy> policy_from_json(const json& doc) {
    check_header(doc, "jobshop-policy", kPolicyFormatVersion);
    std::string kind_name = text(member(doc, "kind", ""), "kind");
    std::transform(kind_name.begin(), kind_name.end(), kind_name.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto kind = parse_policy_kind(kind_name);
    if (!kind) throw InstanceError("kind", "unknown policy kind");
    switch (*kind) {
        case PolicyKind::TabularQ: {
            const int actions = integer(member(doc, "action_count", ""), "action_count");
            TabularQPolicy::Table table;
            const json& entries = array(member(doc, "table", ""), "table");
            for (std::size_t i = 0; i < entries.size(); ++i) {
                auto key = member(entries[i], "key", at("table", i)).get<std::vector<std::int64_t>>();
                auto q = member(entries[i], "q", at("table", i)).get<std::vector<double>>();
                if (static_cast<int>(q.size()) != actions) throw InstanceError(at("table", i) + ".q", "wrong length");
                table.emplace(std::move(key), std::move(q));
            }
            return std::make_unique<TabularQPolicy>(actions, member(doc, "include_clock", "").get<bool>(),
                                                    std::move(table));
        }
        case PolicyKind::Neural: {
            const json& e = member(doc, "encoder", "");
            ObservationEncoder enc;
            enc.machines = integer(member(e, "machines", "encoder"), "encoder.machines");
            enc.jobs = integer(member(e, "jobs", "encoder"), "encoder.jobs");
            enc.setup_counts = member(e, "setup_counts", "encoder").get<std::vector<int>>();
            enc.horizon = number(member(e, "horizon", "encoder"), "encoder.horizon");
            enc.volume_scale = number(member(e, "volume_scale", "encoder"), "encoder.volume_scale");
            const json& n = member(doc, "network", "");
            ActorCritic net(integer(member(n, "inputs", "network"), "network.inputs"),
                            member(n, "hidden", "network").get<std::vector<int>>(),
                            integer(member(n, "actions", "network"), "network.actions"));
            auto params = member(n, "params", "network").get<std::vector<double>>();
            if (params.size() != net.params().size()) throw InstanceError("network.params", "wrong parameter count");
            net.params() = std::move(params);
            if (net.inputs() != enc.input_size()) throw InstanceError("network.inputs", "does not match encoder");
            return std::make_unique<NeuralPolicy>(std::move(enc), std::move(net));
        }
        default:
            return std::make_unique<HeuristicPolicy>(*kind);
    }
}

// ---- tables and files ------------------------------------------------------

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "episode,return,makespan\n";
    for (const auto& p : curve)
        out += std::to_string(p.episode) + "," + format_number(p.episode_return) + "," + format_number(p.makespan) + "\n";
    return out;
}

namespace {

std::vector<std::string> kpi_cells(const Kpis& k) {
    std::string peaks;
    for (std::size_t i = 0; i < k.peak_buffer.size(); ++i) peaks += (i ? "/" : "") + format_number(k.peak_buffer[i]);
    double util = 0.0;
    for (double u : k.machine_utilization) util += u;
    if (!k.machine_utilization.empty()) util /= k.machine_utilization.size();
    return {format_number(k.makespan), format_number(k.total_tardiness), std::to_string(k.tardy_jobs),
            format_number(k.setup_time_total), peaks, format_number(util)};
}

const std::vector<std::string> kKpiHeader = {"policy", "makespan", "tardiness", "tardy_jobs", "setup_total",
                                             "peak_buffer", "mean_util"};

}  // namespace

std::string kpi_table(const std::vector<std::pair<std::string, Kpis>>& rows) {
    std::vector<std::vector<std::string>> cells{kKpiHeader};
    for (const auto& [name, k] : rows) {
        auto row = kpi_cells(k);
        row.insert(row.begin(), name);
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(kKpiHeader.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::string pad(width[c] - row[c].size(), ' ');
            line += c == 0 ? row[c] + pad : "  " + pad + row[c];
        }
        out += line + "\n";
    }
    return out;
}

std::string kpi_csv(const std::vector<std::pair<std::string, Kpis>>& rows) {
    std::string out;
    for (std::size_t c = 0; c < kKpiHeader.size(); ++c) out += (c ? "," : "") + kKpiHeader[c];
    out += "\n";
    for (const auto& [name, k] : rows) {
        out += name;
        for (const auto& cell : kpi_cells(k)) out += "," + cell;
        out += "\n";
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace jobshop
