#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2g::allocation {
struct V2GAllocation;
}

namespace v2g::grid {

enum class BusRole { slack, pv, pq };

std::string_view to_string(BusRole role);

inline constexpr double kDefaultVmin = 0.9;
inline constexpr double kDefaultVmax = 1.1;

struct Bus {
    int id = 0;
    BusRole role = BusRole::pq;
    double vmin = kDefaultVmin;
    double vmax = kDefaultVmax;
    // Voltage magnitude held at pv/slack buses, clamped into [vmin, vmax].
    double vset = 1.0;
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<std::string> zip;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0;
    double rating = 0.0;  // MVA, 0 = unlimited
    bool in_service = true;

    bool operator==(const Branch&) const = default;
};

struct Generator {
    int id = 0;
    int bus = 0;
    double pmin = 0.0;
    double pmax = 0.0;
    double qmin = 0.0;
    double qmax = 0.0;
    double cost_c0 = 0.0;
    double cost_c1 = 0.0;
    double cost_c2 = 0.0;
    std::string fuel;
    bool is_v2g = false;
    bool in_service = true;

    double cost(double p_mw) const { return cost_c0 + cost_c1 * p_mw + cost_c2 * p_mw * p_mw; }

    bool operator==(const Generator&) const = default;
};

struct Load {
    int id = 0;
    int bus = 0;
    double p = 0.0;  // MW
    double q = 0.0;  // MVAr
    bool sheddable = true;

    bool operator==(const Load&) const = default;
};

/// Transmission network in engineering units (MW / MVAr / MVA); impedances
/// are per-unit on base_mva. Treat as a value: every transformation below
/// returns a new case.
struct NetworkCase {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    const Bus* find_bus(int id) const;
    const Generator* find_generator(int id) const;
    std::optional<std::size_t> bus_index(int id) const;

    double total_load_mw() const;
    double in_service_capacity_mw() const;

    bool operator==(const NetworkCase&) const = default;
};

/// Collects every invariant violation; empty means valid.
std::vector<std::string> validate(const NetworkCase& net);

/// Parses the JSON case document and validates it. Schema problems throw
/// ParseError naming the field and record index; invariant violations throw
/// ValidationError listing all of them.
NetworkCase parse_case(std::string_view text);
NetworkCase read_case_file(const std::string& path);
std::string serialize_case(const NetworkCase& net);

struct OutageScenario {
    std::string name;
    std::vector<int> generator_ids;
    double expected_capacity_removed_mw = 0.0;
};

OutageScenario parse_scenario(std::string_view text);
/// Accepts either a single scenario object or an array of them.
std::vector<OutageScenario> parse_scenarios(std::string_view text);

struct OutageResult {
    NetworkCase net;
    double removed_mw = 0.0;
    // Set when removed_mw differs from the scenario's expectation.
    std::optional<std::string> warning;
};

OutageResult apply_outage(const NetworkCase& net, const OutageScenario& scenario);

/// Multiplies every load's p and q by target_peak / total p.
NetworkCase scale_loads_to_peak(const NetworkCase& net, double target_peak_mw);

/// Marginal cost given to inserted V2G units: above every conventional unit
/// so they only run to avert shed.
double v2g_marginal_cost(const NetworkCase& net);

NetworkCase add_v2g_generators(const NetworkCase& net, const allocation::V2GAllocation& alloc);

}  // namespace v2g::grid
