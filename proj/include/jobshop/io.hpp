#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jobshop/environment.hpp"
#include "jobshop/policies.hpp"
#include "jobshop/qlearning.hpp"
#include "jobshop/schedule.hpp"

namespace jobshop {

using json = nlohmann::json;

inline constexpr int kInstanceFormatVersion = 1;
inline constexpr int kScheduleFormatVersion = 1;
inline constexpr int kPolicyFormatVersion = 1;

// ---- instances -------------------------------------------------------------

// Validates the document and the resulting instance. Errors are InstanceError
// carrying a JSON path such as "jobs[1].operations[0].machine".
Instance parse_instance(const json& doc);
Instance parse_instance_text(const std::string& text);
json serialize_instance(const Instance& instance);

// "example3x3" resolves to the bundled example; anything else is a file path.
Instance load_instance(const std::string& name_or_path);

// Hex FNV-1a over the canonical serialisation.
std::string instance_hash(const Instance& instance);

// ---- article catalog and orders --------------------------------------------

struct ComponentSpec {
    std::string name;
    int quantity_per_article = 1;
    std::vector<Operation> ops;
};

struct ArticleSpec {
    std::string article_id;
    std::vector<ComponentSpec> components;  // purchased parts are simply not listed
};

struct Order {
    std::string article_id;
    int quantity = 1;
    Minutes deadline = 0.0;
};

// Plant description plus the articles it can make.
struct Catalog {
    std::vector<Machine> machines;
    std::vector<BufferSpec> buffers;
    std::vector<std::vector<Minutes>> transport;
    std::vector<ArticleSpec> articles;
};

Catalog parse_catalog(const json& doc);
json serialize_catalog(const Catalog& catalog);
std::vector<Order> parse_orders(const json& doc);

// One job per (order, component); batch = order quantity x quantity per
// article, deadline = order deadline. Orders are never merged.
std::vector<Job> expand_orders(const std::vector<ArticleSpec>& catalog, const std::vector<Order>& orders);
Instance build_instance(const Catalog& catalog, const std::vector<Order>& orders, std::string name = "orders");

// ---- random generation -----------------------------------------------------

struct IntRange {
    int lo;
    int hi;
};
struct RealRange {
    double lo;
    double hi;
};

struct GenSpec {
    std::uint64_t seed = 0;
    IntRange jobs{3, 3};
    IntRange machines{3, 3};
    IntRange setups_per_machine{1, 3};  // excluding neutral
    RealRange unit_time{0.02, 0.15};
    IntRange batch_size{50, 400};
    RealRange volume{5.0, 30.0};
    RealRange transport{5.0, 15.0};
    RealRange setup_time{0.0, 10.0};
    RealRange deadline_slack{1.0, 2.0};  // deadline = slack x job's bare processing time
    RealRange buffer_slack{1.0, 2.0};    // capacity = slack x minimum feasible capacity

    void validate() const;
};

// Deterministic per seed; the result always passes validate_instance.
Instance generate_instance(const GenSpec& spec);

// ---- schedules, trajectories, policies -------------------------------------

json kpis_to_json(const Kpis& kpis);
json violations_to_json(const std::vector<Violation>& violations);
json schedule_to_json(const Instance& instance, const Schedule& schedule, const std::string& policy);
Schedule schedule_from_json(const json& doc);

json reward_to_json(const RewardConfig& config);
RewardConfig reward_from_json(const json& doc);

// "makespan", "tardiness" or "balanced" (the default weights); case-insensitive.
RewardConfig reward_for_goal(const std::string& goal);

json observation_to_json(const Observation& obs);

struct TrajectoryHeader {
    std::string instance_hash;
    std::string policy;
    std::uint64_t seed = 0;
    RewardConfig reward;
    Features features;
};

// Line-delimited JSON: one header record, then one record per step.
std::string trajectory_to_jsonl(const TrajectoryHeader& header, const Trajectory& trajectory,
                                const ActionSpace& space);
std::pair<TrajectoryHeader, std::vector<int>> trajectory_actions_from_jsonl(const std::string& text);

json policy_to_json(const Policy& policy, const Features& features);
std::unique_ptr<Policy> policy_from_json(const json& doc);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

// Aligned text table, one row per named KPI set.
std::string kpi_table(const std::vector<std::pair<std::string, Kpis>>& rows);
std::string kpi_csv(const std::vector<std::pair<std::string, Kpis>>& rows);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace jobshop
