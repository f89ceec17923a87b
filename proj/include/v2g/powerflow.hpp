#pragma once

#include "v2g/grid.hpp"

#include <Eigen/Sparse>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace v2g::acopf {

using Complex = std::complex<double>;
using AdmittanceMatrix = Eigen::SparseMatrix<Complex>;

struct SolverOptions {
    double pf_tolerance = 1e-8;  // per-unit mismatch
    int max_pf_iterations = 30;
    double shed_penalty = 1e6;   // $/MWh on every MW shed
    bool enforce_line_limits = true;
    bool enforce_voltage_limits = true;
    int max_opf_iterations = 20;
    double opf_tolerance_mw = 1e-4;  // outer fixed-point test on dispatch
};

/// Throws std::invalid_argument unless shed_penalty exceeds every in-service
/// generator's maximum marginal cost c1 + 2 c2 pmax.
void check_options(const grid::NetworkCase& net, const SolverOptions& options);

/// Pi-model bus admittance matrix in per-unit, indexed by position in
/// net.buses. Out-of-service branches are skipped.
AdmittanceMatrix build_ybus(const grid::NetworkCase& net);

struct BusInjection {
    double p_mw = 0.0;
    double q_mvar = 0.0;
};

struct PowerFlowSolution {
    std::vector<int> bus_ids;
    std::vector<double> vm;  // per-unit
    std::vector<double> va;  // radians
    // Computed net injection at every bus; slack and pv rows carry what the
    // network actually needs there.
    std::vector<BusInjection> injection;
    int iterations = 0;
    double max_mismatch = 0.0;
    bool converged = false;
    std::string diagnostic;
};

struct WarmStart {
    std::vector<double> vm;
    std::vector<double> va;
};

/// Newton-Raphson power flow in polar form. The slack bus holds angle 0 and
/// absorbs the residual; pv buses (role pv with an in-service generator that
/// has reactive range) hold vset; everything else is pq. Injections are
/// indexed like net.buses and are ignored at the slack bus and for Q at pv
/// buses.
PowerFlowSolution solve_powerflow(const grid::NetworkCase& net, const std::vector<BusInjection>& injections,
                                  const SolverOptions& options = {},
                                  const std::optional<WarmStart>& warm = std::nullopt);

/// Net scheduled injections from in-service loads and generators at the
/// given dispatch (MW per generator, same order as net.generators).
std::vector<BusInjection> scheduled_injections(const grid::NetworkCase& net, const std::vector<double>& gen_p_mw);

/// Largest |S_calc - S_spec| over all buses, per-unit, for a full
/// specification of every bus injection (slack and pv included).
double full_mismatch(const grid::NetworkCase& net, const std::vector<double>& vm, const std::vector<double>& va,
                     const std::vector<BusInjection>& injections);

}  // namespace v2g::acopf
