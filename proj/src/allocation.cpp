#include "v2g/allocation.hpp"

#include "v2g/csv.hpp"
#include "v2g/error.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <optional>

namespace v2g::allocation {

double V2GAllocation::total_mw() const {
    double total = 0.0;
    for (const auto& [bus, cap] : buses) total += cap.capacity_mw;
    return total;
}

std::int64_t V2GAllocation::total_vehicles() const {
    std::int64_t total = 0;
    for (const auto& [bus, cap] : buses) total += cap.vehicles;
    return total;
}

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

std::map<std::string, std::int64_t> participants(const std::map<std::string, double>& ev_counts,
                                                 const std::vector<participation::ZipParticipation>& rates) {
    std::map<std::string, double> rate_of;
    for (const auto& r : rates) rate_of[r.zip] = r.participation_rate;
    std::map<std::string, std::int64_t> out;
    for (const auto& [zip, count] : ev_counts) {
        const auto it = rate_of.find(zip);
        if (it == rate_of.end()) throw ModelError("no participation rate for zip " + zip);
        out[zip] = round_half_up(count * it->second);
    }
    return out;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * deg;
    const double dlon = (lon2 - lon1) * deg;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

ZipBusMap nearest_substation_map(const std::vector<ZipCentroid>& centroids, const grid::NetworkCase& net) {
    std::vector<const grid::Bus*> candidates;
    for (const auto& b : net.buses) {
        if (!b.latitude || !b.longitude) continue;
        bool attached = false;
        for (const auto& l : net.loads) attached = attached || l.bus == b.id;
        for (const auto& g : net.generators) attached = attached || g.bus == b.id;
        if (attached) candidates.push_back(&b);
    }
    if (candidates.empty()) throw ModelError("no buses with coordinates and attached load or generation");

    ZipBusMap map;
    map.provenance = MapProvenance::nearest_substation;
    for (const auto& c : centroids) {
        if (!std::isfinite(c.latitude) || !std::isfinite(c.longitude))
            throw ModelError("zip " + c.zip + ": centroid is not finite");
        const grid::Bus* best = nullptr;
        double best_km = 0.0;
        for (const auto* b : candidates) {
            const double km = haversine_km(c.latitude, c.longitude, *b->latitude, *b->longitude);
            if (!best || km < best_km || (km == best_km && b->id < best->id)) {
                best = b;
                best_km = km;
            }
        }
        map.bus_of_zip[c.zip] = best->id;
    }
    return map;
}

V2GAllocation allocate(const std::map<std::string, std::int64_t>& participants_by_zip, const ZipBusMap& map,
                       double power_per_vehicle_kw) {
    if (!(power_per_vehicle_kw > 0.0)) throw ModelError("power per vehicle must be > 0");
    V2GAllocation out;
    out.power_per_vehicle_kw = power_per_vehicle_kw;
    for (const auto& [zip, count] : participants_by_zip) {
        const auto it = map.bus_of_zip.find(zip);
        if (it == map.bus_of_zip.end()) throw ModelError("zip " + zip + " is not mapped to a bus");
        if (count < 0) throw ModelError("zip " + zip + ": negative participant count");
        if (count == 0) continue;
        out.buses[it->second].vehicles += count;
    }
    for (auto& [bus, cap] : out.buses)
        cap.capacity_mw = static_cast<double>(cap.vehicles) * power_per_vehicle_kw / 1000.0;
    return out;
}

ZipBusMap parse_zip_map(std::string_view csv_text, const grid::NetworkCase& net) {
    const auto t = csv::Table::parse(csv_text, "zip map");
    const auto c_zip = t.column("zip");
    const auto c_bus = t.column("bus_id");
    ZipBusMap map;
    map.provenance = MapProvenance::explicit_file;
    std::vector<std::string> failures;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const int bus = static_cast<int>(t.required_number(r, c_bus));
        if (!net.find_bus(bus)) failures.push_back("zip " + t.cell(r, c_zip) + " maps to unknown bus " + std::to_string(bus));
        map.bus_of_zip[t.cell(r, c_zip)] = bus;
    }
    if (!failures.empty()) throw ValidationError(std::move(failures));
    return map;
}

std::vector<ZipCentroid> parse_centroids(std::string_view csv_text) {
    const auto t = csv::Table::parse(csv_text, "zip centroids");
    const auto c_zip = t.column("zip");
    const auto c_lat = t.column("lat");
    const auto c_lon = t.column("lon");
    std::vector<ZipCentroid> out;
    for (std::size_t r = 0; r < t.rows(); ++r)
        out.push_back({t.cell(r, c_zip), t.required_number(r, c_lat), t.required_number(r, c_lon)});
    return out;
}

std::string to_json(const V2GAllocation& alloc) {
    nlohmann::ordered_json doc;
    doc["power_per_vehicle_kw"] = alloc.power_per_vehicle_kw;
    doc["buses"] = nlohmann::ordered_json::object();
    for (const auto& [bus, cap] : alloc.buses)
        doc["buses"][std::to_string(bus)] = {{"vehicles", cap.vehicles}, {"capacity_mw", cap.capacity_mw}};
    return doc.dump(2);
}

}  // namespace v2g::allocation
