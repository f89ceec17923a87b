#pragma once

// LP building blocks shared by the AC and DC dispatch formulations.

#include "v2g/grid.hpp"
#include "v2g/lp.hpp"

#include <map>
#include <vector>

namespace v2g::acopf::detail {

// Cost perturbation per rank so equal-cost units dispatch lowest id first.
inline constexpr double kTieBreakCost = 1e-3;
inline constexpr int kCostSegments = 10;

/// Adds a dispatch variable for one generator. Quadratic costs become a
/// convex piecewise-linear curve through kCostSegments breakpoints.
int add_generator(lp::LinearProgram& program, const grid::Generator& g, int rank, double lo, double hi);

/// Rank of each in-service generator by ascending id.
std::map<int, int> generator_ranks(const grid::NetworkCase& net);
std::map<int, int> load_ranks(const grid::NetworkCase& net);

double shed_cost(double penalty, int rank);

/// Objective contribution of a generator at output p, as the LP prices it.
double generator_cost(const grid::Generator& g, int rank, double p);

}  // namespace v2g::acopf::detail
