#include "support.hpp"
#include "v2g/powerflow.hpp"

#include <doctest.h>

#include <cmath>

using namespace v2g;
using namespace testing_support;
using grid::BusRole;

namespace {

grid::NetworkCase two_bus(double load_mw) {
    grid::NetworkCase net;
    net.buses = {make_bus(1, BusRole::slack), make_bus(2, BusRole::pq)};
    net.branches = {make_branch(1, 2, 0.0, 0.1)};
    net.generators = {make_gen(1, 1, 500.0, 10.0)};
    net.loads = {make_load(1, 2, load_mw)};
    return net;
}

std::vector<double> proportional_dispatch(const grid::NetworkCase& net) {
    double cap = 0.0;
    for (const auto& g : net.generators) cap += g.pmax;
    std::vector<double> p;
    for (const auto& g : net.generators) p.push_back(g.pmax * net.total_load_mw() / cap);
    return p;
}

}  // namespace

TEST_SUITE("powerflow") {
    TEST_CASE("single branch admittance") {
        auto net = two_bus(0.0);
        const auto y = Eigen::MatrixXcd(acopf::build_ybus(net));
        const acopf::Complex j(0.0, 1.0);
        CHECK(std::abs(y(0, 0) - (-10.0 * j)) < 1e-12);
        CHECK(std::abs(y(0, 1) - (10.0 * j)) < 1e-12);
        CHECK(std::abs(y(1, 0) - (10.0 * j)) < 1e-12);
        CHECK(std::abs(y(1, 1) - (-10.0 * j)) < 1e-12);
    }

    TEST_CASE("line charging and out-of-service branches") {
        auto net = two_bus(0.0);
        net.branches[0].b_shunt = 0.2;
        net.branches[0].r = 0.02;
        const auto y = Eigen::MatrixXcd(acopf::build_ybus(net));
        const acopf::Complex ys = 1.0 / acopf::Complex(0.02, 0.1);
        CHECK(std::abs(y(0, 0) - (ys + acopf::Complex(0.0, 0.1))) < 1e-12);
        CHECK(std::abs(y(0, 1) + ys) < 1e-12);

        net.branches.push_back(make_branch(1, 2, 0.0, 0.05));
        net.branches.back().in_service = false;
        CHECK((Eigen::MatrixXcd(acopf::build_ybus(net)) - y).norm() < 1e-12);

        net.branches.clear();
        CHECK(Eigen::MatrixXcd(acopf::build_ybus(net)).norm() == 0.0);
    }

    TEST_CASE("no load gives the flat solution") {
        const auto net = two_bus(0.0);
        const auto pf = acopf::solve_powerflow(net, std::vector<acopf::BusInjection>(2));
        REQUIRE(pf.converged);
        CHECK(pf.iterations <= 1);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(pf.vm[i] == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(pf.va[i]) < 1e-12);
        }
    }

    TEST_CASE("two-bus transfer matches the closed form") {
        // Lossless line, unit sending voltage, no reactive load:
        // P = sin(2d) / (2x) and V2 = cos(d).
        const auto net = two_bus(100.0);
        const auto inj = acopf::scheduled_injections(net, {100.0});
        const auto pf = acopf::solve_powerflow(net, inj);
        REQUIRE(pf.converged);
        const double delta = 0.5 * std::asin(2.0 * 0.1 * 1.0);
        CHECK(pf.va[1] == doctest::Approx(-delta).epsilon(1e-9));
        CHECK(pf.vm[1] == doctest::Approx(std::cos(delta)).epsilon(1e-9));
        CHECK(pf.max_mismatch <= 1e-8);
        // Residual check with the slack row fully specified by its solved injection.
        auto full = inj;
        full[0] = pf.injection[0];
        CHECK(acopf::full_mismatch(net, pf.vm, pf.va, full) <= 1e-8);
        CHECK(std::abs(pf.injection[0].p_mw - 100.0) <= 1e-8 * net.base_mva);  // lossless: slack supplies the load
    }

    TEST_CASE("pv buses hold their setpoint") {
        const auto net = load_fixture("case9_wscc.json");
        const auto pf = acopf::solve_powerflow(net, acopf::scheduled_injections(net, {72.0, 163.0, 85.0}));
        REQUIRE(pf.converged);
        CHECK(pf.vm[0] == doctest::Approx(1.04));
        CHECK(pf.vm[1] == doctest::Approx(1.025));
        CHECK(pf.vm[2] == doctest::Approx(1.025));
        // Published load-flow result for this operating point: slack supplies ~71.6 MW.
        CHECK(pf.injection[0].p_mw == doctest::Approx(71.6).epsilon(0.005));
        CHECK(acopf::full_mismatch(net, pf.vm, pf.va, pf.injection) <= 1e-8);
    }

    TEST_CASE("every bundled fixture converges tightly") {
        for (const char* name : {"case2.json", "case3_ring.json", "case6_ww.json", "case9_wscc.json"}) {
            CAPTURE(name);
            const auto net = load_fixture(name);
            const auto pf = acopf::solve_powerflow(net, acopf::scheduled_injections(net, proportional_dispatch(net)));
            REQUIRE(pf.converged);
            CHECK(pf.iterations <= 15);
            CHECK(acopf::full_mismatch(net, pf.vm, pf.va, pf.injection) <= 1e-8);
        }
    }

    TEST_CASE("islanded bus fails with a singular Jacobian") {
        auto net = two_bus(50.0);
        net.buses.push_back(make_bus(3, BusRole::pq));
        net.loads.push_back(make_load(2, 3, 10.0));
        const auto pf = acopf::solve_powerflow(net, acopf::scheduled_injections(net, {60.0}));
        CHECK_FALSE(pf.converged);
        CHECK(pf.diagnostic.find("singular") != std::string::npos);
    }

    TEST_CASE("iteration limit reports the final mismatch") {
        const auto net = two_bus(2000.0);  // beyond the line's transfer limit
        const auto pf = acopf::solve_powerflow(net, acopf::scheduled_injections(net, {2000.0}));
        CHECK_FALSE(pf.converged);
        CHECK(pf.max_mismatch > 1e-8);
        CHECK_FALSE(pf.diagnostic.empty());
    }
}
