#include "v2g/grid.hpp"

#include "v2g/allocation.hpp"
#include "v2g/csv.hpp"
#include "v2g/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace v2g::grid {

using nlohmann::json;

std::string_view to_string(BusRole role) {
    switch (role) {
        case BusRole::slack: return "slack";
        case BusRole::pv: return "pv";
        case BusRole::pq: return "pq";
    }
    return "pq";
}

const Bus* NetworkCase::find_bus(int id) const {
    for (const auto& b : buses)
        if (b.id == id) return &b;
    return nullptr;
}

const Generator* NetworkCase::find_generator(int id) const {
    for (const auto& g : generators)
        if (g.id == id) return &g;
    return nullptr;
}

std::optional<std::size_t> NetworkCase::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    return std::nullopt;
}

double NetworkCase::total_load_mw() const {
    double total = 0.0;
    for (const auto& l : loads) total += l.p;
    return total;
}

double NetworkCase::in_service_capacity_mw() const {
    double total = 0.0;
    for (const auto& g : generators)
        if (g.in_service) total += g.pmax;
    return total;
}

std::vector<std::string> validate(const NetworkCase& net) {
    std::vector<std::string> failures;
    if (!(net.base_mva > 0.0)) failures.push_back("base_mva must be > 0");

    std::set<int> bus_ids;
    int slack_count = 0;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        if (!bus_ids.insert(b.id).second) failures.push_back("duplicate bus id " + std::to_string(b.id));
        if (b.role == BusRole::slack) ++slack_count;
        if (!(b.vmin > 0.0 && b.vmin <= b.vmax))
            failures.push_back("bus " + std::to_string(b.id) + ": require 0 < vmin <= vmax");
    }
    if (slack_count == 0) failures.push_back("no slack bus");
    if (slack_count > 1) failures.push_back("more than one slack bus (" + std::to_string(slack_count) + ")");

    auto known = [&](int id) { return bus_ids.count(id) > 0; };
    for (std::size_t i = 0; i < net.branches.size(); ++i) {
        const auto& br = net.branches[i];
        const auto where = "branch " + std::to_string(i);
        if (!known(br.from_bus)) failures.push_back(where + ": unknown from bus " + std::to_string(br.from_bus));
        if (!known(br.to_bus)) failures.push_back(where + ": unknown to bus " + std::to_string(br.to_bus));
        if (br.from_bus == br.to_bus) failures.push_back(where + ": from_bus equals to_bus");
        if (br.x == 0.0) failures.push_back(where + ": x must be nonzero");
        if (br.rating < 0.0) failures.push_back(where + ": rating must be >= 0");
    }

    std::set<int> gen_ids;
    for (const auto& g : net.generators) {
        const auto where = "generator " + std::to_string(g.id);
        if (!gen_ids.insert(g.id).second) failures.push_back("duplicate generator id " + std::to_string(g.id));
        if (!known(g.bus)) failures.push_back(where + ": unknown bus " + std::to_string(g.bus));
        if (g.pmin > g.pmax) failures.push_back(where + ": pmin > pmax");
        if (g.qmin > g.qmax) failures.push_back(where + ": qmin > qmax");
        if (g.is_v2g && g.pmin != 0.0) failures.push_back(where + ": v2g generator must have pmin = 0");
    }

    std::set<int> load_ids;
    for (const auto& l : net.loads) {
        const auto where = "load " + std::to_string(l.id);
        if (!load_ids.insert(l.id).second) failures.push_back("duplicate load id " + std::to_string(l.id));
        if (!known(l.bus)) failures.push_back(where + ": unknown bus " + std::to_string(l.bus));
        if (l.p < 0.0) failures.push_back(where + ": p must be >= 0");
    }
    return failures;
}

namespace {

// Field accessors that report "<array>[<index>].<field>" on schema errors.
class Record {
public:
    Record(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ParseError(where_ + ": expected an object");
    }

    double number(const char* key) const {
        const auto& v = require(key);
        if (!v.is_number()) throw ParseError(path(key) + ": expected a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const char* key) const {
        if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
        return number(key);
    }

    int integer(const char* key) const {
        const auto& v = require(key);
        if (!v.is_number_integer()) throw ParseError(path(key) + ": expected an integer");
        return v.get<int>();
    }

    bool boolean(const char* key, std::optional<bool> fallback = std::nullopt) const {
        if (!obj_.contains(key) && fallback) return *fallback;
        const auto& v = require(key);
        if (!v.is_boolean()) throw ParseError(path(key) + ": expected a boolean");
        return v.get<bool>();
    }

    std::string string(const char* key, std::optional<std::string> fallback = std::nullopt) const {
        if (!obj_.contains(key) && fallback) return *fallback;
        const auto& v = require(key);
        if (!v.is_string()) throw ParseError(path(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::optional<std::string> optional_string(const char* key) const {
        if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
        return string(key);
    }

private:
    const json& require(const char* key) const {
        if (!obj_.contains(key)) throw ParseError(path(key) + ": missing field");
        return obj_.at(key);
    }
    std::string path(const char* key) const { return where_ + "." + key; }

    const json& obj_;
    std::string where_;
};

const json& array_field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw ParseError(std::string(key) + ": missing field");
    const auto& arr = doc.at(key);
    if (!arr.is_array()) throw ParseError(std::string(key) + ": expected an array");
    return arr;
}

std::string at(const char* array, std::size_t i) { return std::string(array) + "[" + std::to_string(i) + "]"; }

BusRole parse_role(const std::string& s, const std::string& where) {
    if (s == "slack") return BusRole::slack;
    if (s == "pv") return BusRole::pv;
    if (s == "pq") return BusRole::pq;
    throw ParseError(where + ".role: expected slack|pv|pq, got '" + s + "'");
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

NetworkCase parse_case(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("case: expected a JSON object");

    NetworkCase net;
    net.base_mva = Record(doc, "case").number("base_mva");

    const auto& buses = array_field(doc, "buses");
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const Record r(buses[i], at("buses", i));
        Bus b;
        b.id = r.integer("id");
        b.role = parse_role(r.string("role"), at("buses", i));
        b.vmin = r.optional_number("vmin").value_or(kDefaultVmin);
        b.vmax = r.optional_number("vmax").value_or(kDefaultVmax);
        b.vset = r.optional_number("vset").value_or(1.0);
        b.latitude = r.optional_number("lat");
        b.longitude = r.optional_number("lon");
        b.zip = r.optional_string("zip");
        net.buses.push_back(std::move(b));
    }

    const auto& branches = array_field(doc, "branches");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const Record r(branches[i], at("branches", i));
        Branch br;
        br.from_bus = r.integer("from");
        br.to_bus = r.integer("to");
        br.r = r.number("r");
        br.x = r.number("x");
        br.b_shunt = r.optional_number("b").value_or(0.0);
        br.rating = r.optional_number("rating").value_or(0.0);
        br.in_service = r.boolean("in_service", true);
        net.branches.push_back(br);
    }

    const auto& gens = array_field(doc, "generators");
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const Record r(gens[i], at("generators", i));
        Generator g;
        g.id = r.integer("id");
        g.bus = r.integer("bus");
        g.pmin = r.number("pmin");
        g.pmax = r.number("pmax");
        g.qmin = r.number("qmin");
        g.qmax = r.number("qmax");
        g.cost_c0 = r.optional_number("c0").value_or(0.0);
        g.cost_c1 = r.optional_number("c1").value_or(0.0);
        g.cost_c2 = r.optional_number("c2").value_or(0.0);
        g.fuel = r.string("fuel", std::string{});
        g.is_v2g = r.boolean("is_v2g", false);
        g.in_service = r.boolean("in_service", true);
        net.generators.push_back(std::move(g));
    }

    const auto& loads = array_field(doc, "loads");
    for (std::size_t i = 0; i < loads.size(); ++i) {
        const Record r(loads[i], at("loads", i));
        Load l;
        l.id = r.integer("id");
        l.bus = r.integer("bus");
        l.p = r.number("p");
        l.q = r.number("q");
        l.sheddable = r.boolean("sheddable", true);
        net.loads.push_back(l);
    }

    if (auto failures = validate(net); !failures.empty()) throw ValidationError(std::move(failures));
    return net;
}

NetworkCase read_case_file(const std::string& path) { return parse_case(csv::read_text_file(path)); }

std::string serialize_case(const NetworkCase& net) {
    json doc;
    doc["base_mva"] = net.base_mva;
    doc["buses"] = json::array();
    for (const auto& b : net.buses) {
        json j{{"id", b.id}, {"role", std::string(to_string(b.role))}, {"vmin", b.vmin}, {"vmax", b.vmax}};
        if (b.vset != 1.0) j["vset"] = b.vset;
        if (b.latitude) j["lat"] = *b.latitude;
        if (b.longitude) j["lon"] = *b.longitude;
        if (b.zip) j["zip"] = *b.zip;
        doc["buses"].push_back(std::move(j));
    }
    doc["branches"] = json::array();
    for (const auto& br : net.branches) {
        doc["branches"].push_back({{"from", br.from_bus},
                                   {"to", br.to_bus},
                                   {"r", br.r},
                                   {"x", br.x},
                                   {"b", br.b_shunt},
                                   {"rating", br.rating},
                                   {"in_service", br.in_service}});
    }
    doc["generators"] = json::array();
    for (const auto& g : net.generators) {
        doc["generators"].push_back({{"id", g.id},
                                     {"bus", g.bus},
                                     {"pmin", g.pmin},
                                     {"pmax", g.pmax},
                                     {"qmin", g.qmin},
                                     {"qmax", g.qmax},
                                     {"c0", g.cost_c0},
                                     {"c1", g.cost_c1},
                                     {"c2", g.cost_c2},
                                     {"fuel", g.fuel},
                                     {"is_v2g", g.is_v2g},
                                     {"in_service", g.in_service}});
    }
    doc["loads"] = json::array();
    for (const auto& l : net.loads) {
        doc["loads"].push_back({{"id", l.id}, {"bus", l.bus}, {"p", l.p}, {"q", l.q}, {"sheddable", l.sheddable}});
    }
    return doc.dump(2);
}

namespace {

OutageScenario scenario_from_json(const json& obj, const std::string& where) {
    const Record r(obj, where);
    OutageScenario s;
    s.name = r.string("name");
    if (!obj.contains("generator_ids") || !obj.at("generator_ids").is_array())
        throw ParseError(where + ".generator_ids: expected an array");
    for (const auto& id : obj.at("generator_ids")) {
        if (!id.is_number_integer()) throw ParseError(where + ".generator_ids: expected integers");
        s.generator_ids.push_back(id.get<int>());
    }
    s.expected_capacity_removed_mw = r.optional_number("expected_capacity_removed_mw").value_or(0.0);
    return s;
}

}  // namespace

OutageScenario parse_scenario(std::string_view text) { return scenario_from_json(parse_json(text), "scenario"); }

std::vector<OutageScenario> parse_scenarios(std::string_view text) {
    const json doc = parse_json(text);
    std::vector<OutageScenario> out;
    if (doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(scenario_from_json(doc[i], at("scenarios", i)));
    } else {
        out.push_back(scenario_from_json(doc, "scenario"));
    }
    return out;
}

OutageResult apply_outage(const NetworkCase& net, const OutageScenario& scenario) {
    OutageResult result{net, 0.0, std::nullopt};
    for (int id : scenario.generator_ids) {
        auto it = std::find_if(result.net.generators.begin(), result.net.generators.end(),
                               [id](const Generator& g) { return g.id == id; });
        if (it == result.net.generators.end())
            throw ModelError("outage '" + scenario.name + "': unknown generator id " + std::to_string(id));
        if (it->in_service) {
            result.removed_mw += it->pmax;
            it->in_service = false;
        }
    }
    const double expected = scenario.expected_capacity_removed_mw;
    if (expected > 0.0 && std::abs(result.removed_mw - expected) > 1e-6 * std::max(1.0, expected)) {
        std::ostringstream msg;
        msg << "outage '" << scenario.name << "' removes " << result.removed_mw << " MW, expected " << expected
            << " MW";
        result.warning = msg.str();
    }
    return result;
}

NetworkCase scale_loads_to_peak(const NetworkCase& net, double target_peak_mw) {
    if (!(target_peak_mw > 0.0)) throw ModelError("target peak must be > 0");
    const double total = net.total_load_mw();
    if (!(total > 0.0)) throw ModelError("cannot scale loads: total active load is zero");
    const double k = target_peak_mw / total;
    NetworkCase out = net;
    for (auto& l : out.loads) {
        l.p *= k;
        l.q *= k;
    }
    return out;
}

double v2g_marginal_cost(const NetworkCase& net) {
    double max_c1 = 0.0;
    for (const auto& g : net.generators)
        if (!g.is_v2g) max_c1 = std::max(max_c1, g.cost_c1);
    return max_c1 * 1.5 + 1.0;
}

NetworkCase add_v2g_generators(const NetworkCase& net, const allocation::V2GAllocation& alloc) {
    std::vector<std::string> unknown;
    for (const auto& [bus, cap] : alloc.buses)
        if (!net.find_bus(bus)) unknown.push_back("v2g allocation references unknown bus " + std::to_string(bus));
    if (!unknown.empty()) throw ValidationError(std::move(unknown));

    NetworkCase out = net;
    int next_id = 1;
    for (const auto& g : net.generators) next_id = std::max(next_id, g.id + 1);
    const double cost = v2g_marginal_cost(net);
    for (const auto& [bus, cap] : alloc.buses) {
        if (!(cap.capacity_mw > 0.0)) continue;
        Generator g;
        g.id = next_id++;
        g.bus = bus;
        g.pmin = 0.0;
        g.pmax = cap.capacity_mw;
        g.qmin = 0.0;
        g.qmax = 0.0;
        g.cost_c1 = cost;
        g.fuel = "v2g";
        g.is_v2g = true;
        out.generators.push_back(std::move(g));
    }
    return out;
}

}  // namespace v2g::grid
