#pragma once

#include "v2g/grid.hpp"
#include "v2g/powerflow.hpp"

#include <map>
#include <string>
#include <string_view>

namespace v2g::acopf {

enum class DispatchStatus { optimal, shed_required, failed };

std::string_view to_string(DispatchStatus s);
DispatchStatus parse_status(std::string_view s);

struct Setpoint {
    double p = 0.0;  // MW
    double q = 0.0;  // MVAr

    bool operator==(const Setpoint&) const = default;
};

struct DispatchResult {
    DispatchStatus status = DispatchStatus::failed;
    std::map<int, Setpoint> dispatch;     // in-service generators by id
    std::map<int, double> shed_by_load;   // MW, every load
    double total_shed_fraction = 0.0;
    double generation_cost = 0.0;
    PowerFlowSolution solution;
    int opf_iterations = 0;
    bool outer_converged = false;
    std::string diagnostic;
};

/// Fraction of total load (sheddable or not) that is shed.
inline constexpr double kShedStatusThreshold = 1e-6;

/// AC optimal power flow with continuous load curtailment. Minimizes
/// generation cost + shed_penalty * total shed subject to AC power balance,
/// generator P/Q limits and, when enabled, voltage and line ratings.
///
/// Solved by successive linear programming: each outer iteration linearizes
/// the power-flow equations at the last Newton-Raphson solution, solves an LP
/// for dispatch and shed inside a trust region, then re-solves the AC power
/// flow at that dispatch. Stops when dispatch moves less than
/// opf_tolerance_mw. Limit rows carry penalized elastic slacks so every LP is
/// feasible; any slack left at the fixed point means no feasible operating
/// point exists and the status is failed.
DispatchResult solve_opf_with_shed(const grid::NetworkCase& net, const SolverOptions& options = {});

/// Lossless DC dispatch with the same objective, solved as one exact LP.
DispatchResult solve_dcopf_with_shed(const grid::NetworkCase& net, const SolverOptions& options = {});

/// total_shed_fraction * 100. Throws ModelError on a failed result.
double feasibility_gap(const DispatchResult& result);

/// Percentage rounded to 3 significant figures for display ("40.7", "3.47",
/// "0.00").
std::string format_percent(double pct);

std::string to_json(const DispatchResult& result);

}  // namespace v2g::acopf
