#pragma once

#include "v2g/csv.hpp"
#include "v2g/grid.hpp"

#include <random>
#include <string>

namespace testing_support {

inline std::string fixture(const std::string& name) { return std::string(V2G_SOURCE_DIR) + "/tests/fixtures/" + name; }
inline std::string data_file(const std::string& name) {
    return std::string(V2G_SOURCE_DIR) + "/data/travis_like/" + name;
}

inline v2g::grid::NetworkCase load_fixture(const std::string& name) {
    return v2g::grid::read_case_file(fixture(name));
}

inline v2g::grid::Generator make_gen(int id, int bus, double pmax, double c1, double qrange = 1000.0) {
    v2g::grid::Generator g;
    g.id = id;
    g.bus = bus;
    g.pmin = 0.0;
    g.pmax = pmax;
    g.qmin = -qrange;
    g.qmax = qrange;
    g.cost_c1 = c1;
    return g;
}

inline v2g::grid::Bus make_bus(int id, v2g::grid::BusRole role) {
    v2g::grid::Bus b;
    b.id = id;
    b.role = role;
    return b;
}

inline v2g::grid::Branch make_branch(int from, int to, double r, double x, double rating = 0.0) {
    v2g::grid::Branch br;
    br.from_bus = from;
    br.to_bus = to;
    br.r = r;
    br.x = x;
    br.rating = rating;
    return br;
}

inline v2g::grid::Load make_load(int id, int bus, double p, double q = 0.0) {
    v2g::grid::Load l;
    l.id = id;
    l.bus = bus;
    l.p = p;
    l.q = q;
    return l;
}

/// Random connected case with up to max_buses buses: a spanning tree plus a
/// few extra branches, a slack unit at bus 1, and loads/units scattered.
/// lossless = true sets r = 0 and drops line charging.
inline v2g::grid::NetworkCase random_case(std::mt19937_64& rng, int max_buses, bool lossless) {
    using namespace v2g::grid;
    std::uniform_int_distribution<int> nbus(2, max_buses);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nbus(rng);
    NetworkCase net;
    net.base_mva = 100.0;
    for (int i = 1; i <= n; ++i) net.buses.push_back(make_bus(i, i == 1 ? BusRole::slack : BusRole::pq));
    for (int i = 2; i <= n; ++i) {
        const int parent = 1 + static_cast<int>(u(rng) * (i - 1));
        const double x = 0.02 + 0.06 * u(rng);
        net.branches.push_back(make_branch(parent, i, lossless ? 0.0 : 0.1 * x, x));
    }
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = 1 + static_cast<int>(u(rng) * n);
        const int b = 1 + static_cast<int>(u(rng) * n);
        if (a == b) continue;
        const double x = 0.02 + 0.06 * u(rng);
        net.branches.push_back(make_branch(a, b, lossless ? 0.0 : 0.1 * x, x));
    }
    int gid = 1;
    net.generators.push_back(make_gen(gid++, 1, 20.0 + 80.0 * u(rng), 10.0 + 20.0 * u(rng)));
    for (int i = 2; i <= n; ++i) {
        if (u(rng) < 0.4) net.generators.push_back(make_gen(gid++, i, 10.0 + 60.0 * u(rng), 10.0 + 20.0 * u(rng)));
    }
    int lid = 1;
    for (int i = 1; i <= n; ++i)
        if (i > 1 || u(rng) < 0.3) net.loads.push_back(make_load(lid++, i, 10.0 + 50.0 * u(rng), 0.0));
    return net;
}

}  // namespace testing_support
