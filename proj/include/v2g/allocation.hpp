#pragma once

#include "v2g/grid.hpp"
#include "v2g/participation.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace v2g::allocation {

inline constexpr double kLevel2PowerKw = 7.0;

enum class MapProvenance { explicit_file, nearest_substation };

struct ZipBusMap {
    std::map<std::string, int> bus_of_zip;
    MapProvenance provenance = MapProvenance::explicit_file;
};

struct BusCapacity {
    std::int64_t vehicles = 0;
    double capacity_mw = 0.0;

    bool operator==(const BusCapacity&) const = default;
};

struct V2GAllocation {
    double power_per_vehicle_kw = kLevel2PowerKw;
    std::map<int, BusCapacity> buses;

    double total_mw() const;
    std::int64_t total_vehicles() const;

    bool operator==(const V2GAllocation&) const = default;
};

struct ZipCentroid {
    std::string zip;
    double latitude = 0.0;
    double longitude = 0.0;
};

/// Rounds half-up; the one rounding rule used for vehicle counts.
std::int64_t round_half_up(double x);

/// participants(zip) = round_half_up(count * rate). Throws ModelError naming
/// the first zip with no rate.
std::map<std::string, std::int64_t> participants(const std::map<std::string, double>& ev_counts,
                                                 const std::vector<participation::ZipParticipation>& rates);

/// Great-circle distance in km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

/// Assigns each zip to the nearest bus that carries a load or generator;
/// ties go to the lowest bus id.
ZipBusMap nearest_substation_map(const std::vector<ZipCentroid>& centroids, const grid::NetworkCase& net);

V2GAllocation allocate(const std::map<std::string, std::int64_t>& participants_by_zip, const ZipBusMap& map,
                       double power_per_vehicle_kw = kLevel2PowerKw);

/// Explicit map CSV: zip,bus_id. Bus ids are checked against the case.
ZipBusMap parse_zip_map(std::string_view csv_text, const grid::NetworkCase& net);
std::vector<ZipCentroid> parse_centroids(std::string_view csv_text);

std::string to_json(const V2GAllocation& alloc);

}  // namespace v2g::allocation
