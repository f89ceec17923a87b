#include "support.hpp"
#include "v2g/allocation.hpp"
#include "v2g/error.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace v2g;
using namespace v2g::allocation;
using namespace testing_support;

namespace {

// Central angle from the dot product of unit vectors; independent of the
// half-angle formula under test.
double chord_angle_km(double lat1, double lon1, double lat2, double lon2) {
    const double d = std::numbers::pi / 180.0;
    const double x1 = std::cos(lat1 * d) * std::cos(lon1 * d), y1 = std::cos(lat1 * d) * std::sin(lon1 * d),
                 z1 = std::sin(lat1 * d);
    const double x2 = std::cos(lat2 * d) * std::cos(lon2 * d), y2 = std::cos(lat2 * d) * std::sin(lon2 * d),
                 z2 = std::sin(lat2 * d);
    const double cross = std::hypot(y1 * z2 - z1 * y2, z1 * x2 - x1 * z2, x1 * y2 - y1 * x2);
    return 6371.0088 * std::atan2(cross, x1 * x2 + y1 * y2 + z1 * z2);
}

participation::ZipParticipation rate(const std::string& zip, double r) {
    participation::ZipParticipation z;
    z.zip = zip;
    z.participation_rate = r;
    return z;
}

}  // namespace

TEST_SUITE("allocation") {
    TEST_CASE("round half up") {
        CHECK(round_half_up(0.75) == 1);
        CHECK(round_half_up(2.5) == 3);
        CHECK(round_half_up(2.4999) == 2);
        CHECK(round_half_up(0.0) == 0);
    }

    TEST_CASE("participants from counts and rates") {
        const auto p = participants({{"a", 1000}, {"b", 3}, {"c", 77}}, {rate("a", 0.5), rate("b", 0.25), rate("c", 0.0)});
        CHECK(p.at("a") == 500);
        CHECK(p.at("b") == 1);
        CHECK(p.at("c") == 0);
        CHECK_THROWS_WITH_AS(participants({{"a", 1}, {"zz", 4}}, {rate("a", 1.0)}), "no participation rate for zip zz",
                             ModelError);
    }

    TEST_CASE("haversine agrees with an independent great-circle formula") {
        CHECK(haversine_km(30.0, -97.0, 30.0, -97.0) == 0.0);
        // Austin to Dallas is roughly 290 km.
        CHECK(haversine_km(30.2672, -97.7431, 32.7767, -96.7970) == doctest::Approx(293.0).epsilon(0.02));
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
        for (int i = 0; i < 200; ++i) {
            const double a = lat(rng), b = lon(rng), c = lat(rng), e = lon(rng);
            CHECK(haversine_km(a, b, c, e) == doctest::Approx(chord_angle_km(a, b, c, e)).epsilon(1e-9));
        }
    }

    TEST_CASE("nearest substation matches brute force") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> dlat(-0.3, 0.3), dlon(-0.3, 0.3);
        for (int trial = 0; trial < 20; ++trial) {
            grid::NetworkCase net;
            for (int i = 1; i <= 8; ++i) {
                auto b = make_bus(i, i == 1 ? grid::BusRole::slack : grid::BusRole::pq);
                b.latitude = 30.27 + dlat(rng);
                b.longitude = -97.74 + dlon(rng);
                net.buses.push_back(b);
            }
            // Bus 8 has nothing attached and must never be chosen.
            net.generators.push_back(make_gen(1, 1, 100, 10));
            for (int i = 2; i <= 7; ++i) net.loads.push_back(make_load(i, i, 10));
            std::vector<ZipCentroid> zips;
            for (int k = 0; k < 10; ++k) zips.push_back({std::to_string(78700 + k), 30.27 + dlat(rng), -97.74 + dlon(rng)});
            const auto map = nearest_substation_map(zips, net);
            CHECK(map.provenance == MapProvenance::nearest_substation);
            for (const auto& z : zips) {
                int best = 0;
                double best_km = 1e300;
                for (int i = 1; i <= 7; ++i) {
                    const auto& b = net.buses[static_cast<std::size_t>(i - 1)];
                    const double km = chord_angle_km(z.latitude, z.longitude, *b.latitude, *b.longitude);
                    if (km < best_km) {
                        best_km = km;
                        best = i;
                    }
                }
                CHECK(map.bus_of_zip.at(z.zip) == best);
            }
        }
    }

    TEST_CASE("equidistant zip goes to the lowest bus id") {
        grid::NetworkCase net;
        auto a = make_bus(5, grid::BusRole::slack), b = make_bus(3, grid::BusRole::pq);
        a.latitude = 30.0, a.longitude = -97.1;
        b.latitude = 30.0, b.longitude = -96.9;
        net.buses = {a, b};
        net.generators = {make_gen(1, 5, 10, 1)};
        net.loads = {make_load(1, 3, 5)};
        const auto map = nearest_substation_map({{"z", 30.0, -97.0}}, net);
        CHECK(map.bus_of_zip.at("z") == 3);
        net.buses[0].latitude.reset();
        net.buses[1].latitude.reset();
        CHECK_THROWS_AS(nearest_substation_map({{"z", 30.0, -97.0}}, net), ModelError);
    }

    TEST_CASE("allocation sums vehicles per bus") {
        ZipBusMap map;
        map.bus_of_zip = {{"a", 2}, {"b", 2}, {"c", 3}, {"d", 4}};
        const auto alloc = allocate({{"a", 100}, {"b", 43}, {"c", 7}, {"d", 0}}, map);
        CHECK(alloc.buses.size() == 2);
        CHECK(alloc.buses.at(2).vehicles == 143);
        CHECK(alloc.buses.at(2).capacity_mw == 143 * 7.0 / 1000.0);
        CHECK(alloc.total_vehicles() == 150);
        CHECK(alloc.total_mw() == doctest::Approx(1.05));
        CHECK_THROWS_WITH_AS(allocate({{"q", 1}}, map), "zip q is not mapped to a bus", ModelError);
        CHECK_THROWS_AS(allocate({{"a", 1}}, map, 0.0), ModelError);
        CHECK(allocate({{"a", 10}}, map, 11.0).buses.at(2).capacity_mw == 0.11);
    }

    TEST_CASE("explicit map parsing checks bus ids") {
        const auto net = load_fixture("case3_ring.json");
        const auto map = parse_zip_map("zip,bus_id\n78701,3\n78702,2\n", net);
        CHECK(map.provenance == MapProvenance::explicit_file);
        CHECK(map.bus_of_zip.at("78701") == 3);
        CHECK_THROWS_AS(parse_zip_map("zip,bus_id\n78701,9\n", net), ValidationError);
        const auto c = parse_centroids("zip,lat,lon\n78701,30.27,-97.74\n");
        CHECK(c.at(0).longitude == -97.74);
    }
}
