#pragma once

// Shared AC network kernels for the power-flow and OPF solvers.

#include "v2g/powerflow.hpp"

#include <Eigen/Dense>

namespace v2g::acopf::detail {

enum class NodeType { ref, pv, pq };

struct Line {
    std::size_t branch = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    Complex yff;
    Complex yft;
    double rating_pu = 0.0;
};

std::vector<Line> in_service_lines(const grid::NetworkCase& net);

Eigen::VectorXcd voltages(const std::vector<double>& vm, const std::vector<double>& va);

/// S = V .* conj(Y V), per-unit.
Eigen::VectorXcd calc_injections(const AdmittanceMatrix& ybus, const Eigen::VectorXcd& v);

/// dS/dVa and dS/dVm as dense n x n matrices.
void power_derivatives(const AdmittanceMatrix& ybus, const Eigen::VectorXcd& v, Eigen::MatrixXcd& ds_dva,
                       Eigen::MatrixXcd& ds_dvm);

/// Reduced state: angles of non-ref buses then magnitudes of pq buses.
struct StateIndex {
    std::vector<std::size_t> pvpq;
    std::vector<std::size_t> pq;
    std::vector<int> angle_pos;      // bus -> position in state, -1 if fixed
    std::vector<int> magnitude_pos;  // bus -> position in state, -1 if fixed
    std::size_t size() const { return pvpq.size() + pq.size(); }
};

StateIndex make_index(const std::vector<NodeType>& types);

Eigen::MatrixXd jacobian(const Eigen::MatrixXcd& ds_dva, const Eigen::MatrixXcd& ds_dvm, const StateIndex& idx);

struct NrResult {
    std::vector<double> vm, va;
    int iterations = 0;
    double max_mismatch = 0.0;
    bool converged = false;
    std::string diagnostic;
};

/// Core Newton-Raphson loop. spec_pu holds scheduled complex injections
/// (only the entries selected by the node types are enforced).
NrResult newton_raphson(const AdmittanceMatrix& ybus, const std::vector<NodeType>& types,
                        const Eigen::VectorXcd& spec_pu, std::vector<double> vm, std::vector<double> va,
                        double tolerance, int max_iterations);

/// Bus types used by solve_powerflow: role slack is ref, role pv with a
/// voltage-controlling in-service generator is pv.
std::vector<NodeType> default_types(const grid::NetworkCase& net);

bool controls_voltage(const grid::Generator& g);

}  // namespace v2g::acopf::detail
