#include "dispatch_lp.hpp"
#include "v2g/opf.hpp"

#include <cmath>

namespace v2g::acopf {

namespace {

// Bus angles live in [-kAngleBound, kAngleBound] radians; wide enough to
// never bind on a connected network.
constexpr double kAngleBound = 50.0;

}  // namespace

DispatchResult solve_dcopf_with_shed(const grid::NetworkCase& net, const SolverOptions& options) {
    DispatchResult result;
    for (const auto& l : net.loads) result.shed_by_load[l.id] = 0.0;
    if (auto problems = grid::validate(net); !problems.empty()) {
        result.diagnostic = "invalid case: " + problems.front();
        return result;
    }
    check_options(net, options);

    const std::size_t n = net.buses.size();
    const double base = net.base_mva;
    lp::LinearProgram prog;
    const auto gen_rank = detail::generator_ranks(net);
    const auto load_rank = detail::load_ranks(net);

    std::vector<int> angle(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool ref = net.buses[i].role == grid::BusRole::slack;
        angle[i] = ref ? prog.add_variable(0.0, 0.0, 0.0) : prog.add_variable(0.0, -kAngleBound, kAngleBound);
    }

    std::vector<std::vector<lp::LinearProgram::Term>> balance(n);
    std::vector<double> demand(n, 0.0);
    std::vector<std::pair<std::size_t, int>> gen_vars;
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        const auto& g = net.generators[k];
        if (!g.in_service) continue;
        const int v = detail::add_generator(prog, g, gen_rank.at(g.id), g.pmin, g.pmax);
        gen_vars.emplace_back(k, v);
        balance[*net.bus_index(g.bus)].emplace_back(v, 1.0);
    }
    std::vector<std::pair<std::size_t, int>> shed_vars;
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const auto& l = net.loads[k];
        const auto b = *net.bus_index(l.bus);
        demand[b] += l.p;
        if (!l.sheddable || !(l.p > 0.0)) continue;
        const int v = prog.add_variable(detail::shed_cost(options.shed_penalty, load_rank.at(l.id)), 0.0, l.p);
        shed_vars.emplace_back(k, v);
        balance[b].emplace_back(v, 1.0);
    }

    // Net injection = sum over lines of base * (theta_i - theta_j) / x.
    for (const auto& br : net.branches) {
        if (!br.in_service) continue;
        const auto f = *net.bus_index(br.from_bus);
        const auto t = *net.bus_index(br.to_bus);
        const double b = base / br.x;
        balance[f].emplace_back(angle[f], -b);
        balance[f].emplace_back(angle[t], b);
        balance[t].emplace_back(angle[t], -b);
        balance[t].emplace_back(angle[f], b);
        if (options.enforce_line_limits && br.rating > 0.0)
            prog.add_row({{angle[f], b}, {angle[t], -b}}, -br.rating, br.rating);
    }
    for (std::size_t i = 0; i < n; ++i) prog.add_row(balance[i], demand[i], demand[i]);

    const auto sol = lp::solve(prog);
    if (sol.status != lp::Status::optimal) {
        result.diagnostic = "DC dispatch LP " + std::string(lp::to_string(sol.status));
        return result;
    }

    double total_shed = 0.0;
    for (const auto& [k, v] : shed_vars) {
        const double shed = sol.x[static_cast<std::size_t>(v)];
        result.shed_by_load[net.loads[k].id] = shed;
        total_shed += shed;
    }
    for (const auto& [k, v] : gen_vars) {
        const auto& g = net.generators[k];
        const double p = sol.x[static_cast<std::size_t>(v)];
        result.dispatch[g.id] = {p, 0.0};
        result.generation_cost += g.cost(p);
    }
    const double total_load = net.total_load_mw();
    result.total_shed_fraction = total_load > 0.0 ? total_shed / total_load : 0.0;
    result.status =
        result.total_shed_fraction < kShedStatusThreshold ? DispatchStatus::optimal : DispatchStatus::shed_required;

    auto& pf = result.solution;
    pf.converged = true;
    for (std::size_t i = 0; i < n; ++i) {
        pf.bus_ids.push_back(net.buses[i].id);
        pf.vm.push_back(1.0);
        pf.va.push_back(sol.x[static_cast<std::size_t>(angle[i])]);
    }
    result.outer_converged = true;
    result.opf_iterations = 1;
    return result;
}

}  // namespace v2g::acopf
