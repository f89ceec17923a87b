#include "support.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace v2g;
using namespace v2g::fleet;

namespace {

FleetParams flat_params(double population, int first, int last, double pop_growth = 0.0, double share_growth = 0.0) {
    FleetParams p;
    p.zip_population["z"] = population;
    for (int y = first; y <= last; ++y) {
        p.population_growth[y] = pop_growth;
        p.base_share_growth[y] = share_growth;
    }
    return p;
}

std::map<std::string, ZipRegistrations> one_zip(double count) { return {{"z", ZipRegistrations{count, {}}}}; }

// Spreadsheet-style recomputation: one column per year, cohort ages as rows.
std::vector<double> oracle_ev_stock(double evs, double population, double ownership, int lifetime, double share0,
                                    double pop_growth, double share_growth, double multiplier, int years) {
    std::vector<double> ages(static_cast<std::size_t>(lifetime), 0.0);
    const double base = std::floor(evs / lifetime);
    double rem = evs - base * lifetime;
    for (auto& a : ages) {
        a = base + (rem >= 1.0 ? 1.0 : rem);
        rem = std::max(0.0, rem - 1.0);
    }
    double stock = population * ownership, share = share0;
    std::vector<double> out;
    for (int t = 1; t <= years; ++t) {
        const double next_stock = stock * (1.0 + pop_growth);
        const double sales = std::max(0.0, stock / lifetime + next_stock - stock);
        share = std::min(1.0, std::max(0.0, share * (1.0 + share_growth * multiplier)));
        for (int a = lifetime - 1; a > 0; --a) ages[static_cast<std::size_t>(a)] = ages[static_cast<std::size_t>(a - 1)];
        ages[0] = sales * share;
        stock = next_stock;
        double sum = 0.0;
        for (double a : ages) sum += a;
        out.push_back(sum);
    }
    return out;
}

}  // namespace

TEST_SUITE("fleet") {
    TEST_CASE("uniform initialization") {
        auto p = flat_params(1000, 2026, 2026);
        auto s = initialize(one_zip(150), p, 2025);
        CHECK(s.zips.at("z").cohorts == std::vector<double>(15, 10.0));

        s = initialize(one_zip(7), p, 2025);
        const auto& c = s.zips.at("z").cohorts;
        CHECK(s.zips.at("z").ev_stock() == 7.0);
        CHECK(c[0] == 1.0);
        CHECK(c[6] == 1.0);
        CHECK(c[7] == 0.0);

        CHECK(initialize({}, p, 2025).zips.empty());
        CHECK_THROWS_AS(initialize(one_zip(-1), p, 2025), ModelError);
        CHECK_THROWS_AS(initialize({{"other", ZipRegistrations{5, {}}}}, p, 2025), ModelError);
    }

    TEST_CASE("purchase-year histogram places cohorts by age") {
        auto p = flat_params(1000, 2026, 2026);
        ZipRegistrations r;
        r.count = 30;
        r.by_purchase_year = {{2025, 10}, {2020, 15}, {1990, 5}};
        const auto s = initialize({{"z", r}}, p, 2025);
        const auto& c = s.zips.at("z").cohorts;
        CHECK(c[0] == 10.0);
        CHECK(c[5] == 15.0);
        CHECK(c[14] == 5.0);  // older than the lifetime clips into the oldest cohort
        r.by_purchase_year = {{2027, 30}};
        CHECK_THROWS_AS(initialize({{"z", r}}, p, 2025), ModelError);
    }

    TEST_CASE("grouping keeps histograms only when every row is dated") {
        std::vector<Registration> regs(3);
        regs[0] = {"a", "", "", 5, 0, false, 2020};
        regs[1] = {"a", "", "", 3, 0, false, 2021};
        regs[2] = {"b", "", "", 4, 0, false, std::nullopt};
        auto g = group_registrations(regs);
        CHECK(g.at("a").by_purchase_year.size() == 2);
        CHECK(g.at("b").by_purchase_year.empty());
        regs.push_back({"a", "", "", 1, 0, false, std::nullopt});
        g = group_registrations(regs);
        CHECK(g.at("a").count == 9.0);
        CHECK(g.at("a").by_purchase_year.empty());
    }

    TEST_CASE("one step of hand arithmetic") {
        auto p = flat_params(1250, 2026, 2026, 0.02, 0.0);  // stock 1000
        p.initial_ev_share = 0.10;
        const auto s0 = initialize(one_zip(150), p, 2025);
        std::map<std::string, StepFlows> flows;
        const auto s1 = step_year(s0, p, &flows);
        CHECK(flows["z"].retirements == doctest::Approx(66.6667).epsilon(1e-5));
        CHECK(flows["z"].new_sales == doctest::Approx(86.6667).epsilon(1e-5));
        CHECK(flows["z"].new_evs == doctest::Approx(8.66667).epsilon(1e-5));
        CHECK(flows["z"].retired_evs == 10.0);
        CHECK(s1.zips.at("z").total_stock == doctest::Approx(1020.0));
        CHECK(s1.year == 2026);
    }

    TEST_CASE("cohorts are conserved exactly over thirty years") {
        auto p = flat_params(50000, 2026, 2055, 0.015, 0.08);
        p.incentive_multiplier = 1.3;
        p.initial_ev_share = 0.05;
        auto s = initialize(one_zip(1234), p, 2025);
        for (int t = 0; t < 30; ++t) {
            std::map<std::string, StepFlows> flows;
            const auto next = step_year(s, p, &flows);
            const auto& a = s.zips.at("z").cohorts;
            const auto& b = next.zips.at("z").cohorts;
            CHECK(flows["z"].retired_evs == a.back());
            CHECK(b[0] == flows["z"].new_evs);
            CHECK(std::equal(a.begin(), a.end() - 1, b.begin() + 1));
            CHECK(next.zips.at("z").ev_stock() == std::accumulate(b.begin(), b.end(), 0.0));
            s = next;
        }
    }

    TEST_CASE("zero growth with a matching share is a steady state") {
        auto p = flat_params(1875, 2026, 2060);  // stock 1500, retirements 100/yr
        p.initial_ev_share = 0.10;               // new EVs 10/yr = 150 / 15
        auto s = initialize(one_zip(150), p, 2025);
        for (int t = 0; t < 35; ++t) {
            s = step_year(s, p);
            CHECK(std::abs(s.zips.at("z").ev_stock() - 150.0) <= 1e-9);
        }
    }

    TEST_CASE("higher incentive multiplier never lowers the projection") {
        double previous_share = -1.0, previous_stock = -1.0;
        for (int k = 0; k < 10; ++k) {
            auto p = flat_params(40000, 2026, 2040, 0.01, 0.1);
            p.incentive_multiplier = 0.5 + 0.25 * k;
            p.initial_ev_share = 0.04;
            const auto s1 = step_year(initialize(one_zip(900), p, 2025), p);
            auto s = s1;
            while (s.year < 2040) s = step_year(s, p);
            CHECK(s1.zips.at("z").ev_share > previous_share);
            CHECK(s.zips.at("z").ev_stock() >= previous_stock);
            previous_share = s1.zips.at("z").ev_share;
            previous_stock = s.zips.at("z").ev_stock();
        }
    }

    TEST_CASE("share saturates at one") {
        auto p = flat_params(1000, 2026, 2040, 0.0, 2.0);
        p.initial_ev_share = 0.5;
        auto s = initialize(one_zip(15), p, 2025);
        for (int t = 0; t < 15; ++t) s = step_year(s, p);
        CHECK(s.zips.at("z").ev_share == 1.0);
        CHECK(s.zips.at("z").ev_stock() == doctest::Approx(800.0));
    }

    TEST_CASE("projection matches an independent recurrence") {
        auto p = flat_params(120000, 2026, 2040, 0.018, 0.17);
        p.incentive_multiplier = 1.2;
        p.initial_ev_share = 0.1;
        p.ownership_rate = 0.8;
        const auto proj = project(one_zip(3877), p, 2025, {2025, 2030, 2035, 2040});
        const auto oracle = oracle_ev_stock(3877, 120000, 0.8, 15, 0.1, 0.018, 0.17, 1.2, 15);
        CHECK(proj.ev_count.at(2025).at("z") == 3877.0);
        for (int y : {2030, 2035, 2040}) {
            const double want = oracle[static_cast<std::size_t>(y - 2026)];
            CAPTURE(y);
            CHECK(std::abs(proj.ev_count.at(y).at("z") - want) <= 1e-6 * want);
        }
        CHECK(proj.rounded(2030, "z") == static_cast<long long>(std::floor(oracle[4] + 0.5)));
    }

    TEST_CASE("projection edge cases") {
        auto p = flat_params(1000, 2026, 2030);
        p.initial_ev_share = 0.0;
        const auto zero = project(one_zip(0), p, 2025, {2030});
        CHECK(zero.ev_count.at(2030).at("z") == 0.0);
        CHECK_THROWS_AS(project(one_zip(10), p, 2025, {2024}), ModelError);
        CHECK_THROWS_WITH_AS(project(one_zip(10), p, 2025, {2031}),
                             "fleet params: missing base_share_growth entry for year 2031", ModelError);
    }

    TEST_CASE("per-zip growth overrides the global series") {
        auto p = flat_params(1000, 2026, 2026, 0.0);
        p.population_growth_by_zip["z"][2026] = 0.5;
        const auto s = step_year(initialize(one_zip(15), p, 2025), p);
        CHECK(s.zips.at("z").total_stock == doctest::Approx(1200.0));
    }

    TEST_CASE("parameter parsing and validation") {
        const auto p = parse_params(
            R"({"vehicle_lifetime": 12, "ownership_rate": 0.7, "population_growth": {"2026": 0.01},
                "base_share_growth": {"2026": 0.2}, "zip_population": {"78701": 5000}})");
        CHECK(p.vehicle_lifetime == 12);
        CHECK(p.population_growth.at(2026) == 0.01);
        CHECK(p.zip_population.at("78701") == 5000.0);
        CHECK_THROWS_AS(parse_params(R"({"vehicle_lifetime": 0})"), ModelError);
        CHECK_THROWS_AS(parse_params(R"({"ownership_rate": -1})"), ModelError);
        CHECK_THROWS_AS(parse_params(R"({"population_growth": {"abc": 1}})"), ParseError);
        CHECK_THROWS_AS(parse_params("[1"), ParseError);
    }

    TEST_CASE("registrations csv") {
        const auto regs = parse_registrations_csv(
            "zip,make,model,count,usable_kwh,is_phev\n78701,Tesla,Model 3,10,82,0\n78701,BMW,330e,4,12,1\n78702,Nissan,Leaf,3,40,false\n");
        REQUIRE(regs.size() == 3);
        CHECK(regs[1].is_phev);
        CHECK_FALSE(regs[2].is_phev);
        CHECK(ev_counts_by_zip(regs).at("78701") == 14.0);
        CHECK_THROWS_AS(parse_registrations_csv("zip,count\n78701,-3\n"), ModelError);
        CHECK_THROWS_AS(parse_registrations_csv("zip,make\n78701,x\n"), ParseError);
    }
}
