#include "v2g/powerflow.hpp"

#include "ac_network.hpp"
#include "v2g/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace v2g::acopf {

namespace detail {

bool controls_voltage(const grid::Generator& g) { return g.in_service && g.qmax > g.qmin; }

std::vector<Line> in_service_lines(const grid::NetworkCase& net) {
    std::vector<Line> lines;
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        if (!br.in_service) continue;
        const Complex ys = 1.0 / Complex(br.r, br.x);
        Line line;
        line.branch = k;
        line.from = *net.bus_index(br.from_bus);
        line.to = *net.bus_index(br.to_bus);
        line.yff = ys + Complex(0.0, br.b_shunt / 2.0);
        line.yft = -ys;
        line.rating_pu = br.rating / net.base_mva;
        lines.push_back(line);
    }
    return lines;
}

Eigen::VectorXcd voltages(const std::vector<double>& vm, const std::vector<double>& va) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(vm.size()));
    for (std::size_t i = 0; i < vm.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::polar(vm[i], va[i]);
    return v;
}

Eigen::VectorXcd calc_injections(const AdmittanceMatrix& ybus, const Eigen::VectorXcd& v) {
    const Eigen::VectorXcd current = ybus * v;
    return v.cwiseProduct(current.conjugate());
}

void power_derivatives(const AdmittanceMatrix& ybus, const Eigen::VectorXcd& v, Eigen::MatrixXcd& ds_dva,
                       Eigen::MatrixXcd& ds_dvm) {
    const auto n = v.size();
    const Eigen::VectorXcd current = ybus * v;
    Eigen::VectorXcd vnorm(n);
    for (Eigen::Index i = 0; i < n; ++i) vnorm[i] = v[i] / std::abs(v[i]);

    ds_dva = Eigen::MatrixXcd::Zero(n, n);
    ds_dvm = Eigen::MatrixXcd::Zero(n, n);
    const Complex j(0.0, 1.0);
    for (int k = 0; k < ybus.outerSize(); ++k) {
        for (AdmittanceMatrix::InnerIterator it(ybus, k); it; ++it) {
            const auto r = it.row();
            const auto c = it.col();
            const Complex y = it.value();
            // -j V_r conj(Y_rc V_c) and V_r conj(Y_rc Vnorm_c)
            ds_dva(r, c) += -j * v[r] * std::conj(y * v[c]);
            ds_dvm(r, c) += v[r] * std::conj(y * vnorm[c]);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        ds_dva(i, i) += j * v[i] * std::conj(current[i]);
        ds_dvm(i, i) += std::conj(current[i]) * vnorm[i];
    }
}

StateIndex make_index(const std::vector<NodeType>& types) {
    StateIndex idx;
    idx.angle_pos.assign(types.size(), -1);
    idx.magnitude_pos.assign(types.size(), -1);
    for (std::size_t i = 0; i < types.size(); ++i)
        if (types[i] != NodeType::ref) idx.pvpq.push_back(i);
    for (std::size_t i = 0; i < types.size(); ++i)
        if (types[i] == NodeType::pq) idx.pq.push_back(i);
    for (std::size_t k = 0; k < idx.pvpq.size(); ++k) idx.angle_pos[idx.pvpq[k]] = static_cast<int>(k);
    for (std::size_t k = 0; k < idx.pq.size(); ++k)
        idx.magnitude_pos[idx.pq[k]] = static_cast<int>(idx.pvpq.size() + k);
    return idx;
}

Eigen::MatrixXd jacobian(const Eigen::MatrixXcd& ds_dva, const Eigen::MatrixXcd& ds_dvm, const StateIndex& idx) {
    const auto npvpq = static_cast<Eigen::Index>(idx.pvpq.size());
    const auto npq = static_cast<Eigen::Index>(idx.pq.size());
    Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) {
        const auto br = static_cast<Eigen::Index>(idx.pvpq[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < npvpq; ++c)
            jac(r, c) = ds_dva(br, static_cast<Eigen::Index>(idx.pvpq[static_cast<std::size_t>(c)])).real();
        for (Eigen::Index c = 0; c < npq; ++c)
            jac(r, npvpq + c) = ds_dvm(br, static_cast<Eigen::Index>(idx.pq[static_cast<std::size_t>(c)])).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
        const auto br = static_cast<Eigen::Index>(idx.pq[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < npvpq; ++c)
            jac(npvpq + r, c) = ds_dva(br, static_cast<Eigen::Index>(idx.pvpq[static_cast<std::size_t>(c)])).imag();
        for (Eigen::Index c = 0; c < npq; ++c)
            jac(npvpq + r, npvpq + c) =
                ds_dvm(br, static_cast<Eigen::Index>(idx.pq[static_cast<std::size_t>(c)])).imag();
    }
    return jac;
}

namespace {

Eigen::VectorXd mismatch_vector(const AdmittanceMatrix& ybus, const Eigen::VectorXcd& v,
                                const Eigen::VectorXcd& spec, const StateIndex& idx) {
    const Eigen::VectorXcd s = calc_injections(ybus, v) - spec;
    Eigen::VectorXd f(static_cast<Eigen::Index>(idx.size()));
    Eigen::Index k = 0;
    for (auto i : idx.pvpq) f[k++] = s[static_cast<Eigen::Index>(i)].real();
    for (auto i : idx.pq) f[k++] = s[static_cast<Eigen::Index>(i)].imag();
    return f;
}

}  // namespace

NrResult newton_raphson(const AdmittanceMatrix& ybus, const std::vector<NodeType>& types,
                        const Eigen::VectorXcd& spec_pu, std::vector<double> vm, std::vector<double> va,
                        double tolerance, int max_iterations) {
    const StateIndex idx = make_index(types);
    NrResult res;
    Eigen::VectorXcd v = voltages(vm, va);
    Eigen::VectorXd f = mismatch_vector(ybus, v, spec_pu, idx);
    res.max_mismatch = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;

    while (res.max_mismatch > tolerance) {
        if (res.iterations >= max_iterations) {
            res.diagnostic = "iteration limit reached with mismatch " + std::to_string(res.max_mismatch) + " p.u.";
            res.vm = std::move(vm);
            res.va = std::move(va);
            return res;
        }
        Eigen::MatrixXcd ds_dva, ds_dvm;
        power_derivatives(ybus, v, ds_dva, ds_dvm);
        const Eigen::MatrixXd jac = jacobian(ds_dva, ds_dvm, idx);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        lu.setThreshold(1e-10);
        if (!lu.isInvertible()) {
            res.diagnostic = "singular Jacobian: a bus has no branch path to the slack bus";
            res.vm = std::move(vm);
            res.va = std::move(va);
            return res;
        }
        const Eigen::VectorXd dx = -lu.solve(f);
        for (std::size_t k = 0; k < idx.pvpq.size(); ++k) va[idx.pvpq[k]] += dx[static_cast<Eigen::Index>(k)];
        for (std::size_t k = 0; k < idx.pq.size(); ++k)
            vm[idx.pq[k]] += dx[static_cast<Eigen::Index>(idx.pvpq.size() + k)];
        ++res.iterations;

        v = voltages(vm, va);
        f = mismatch_vector(ybus, v, spec_pu, idx);
        res.max_mismatch = f.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res.max_mismatch)) {
            res.diagnostic = "diverged (non-finite mismatch)";
            res.vm = std::move(vm);
            res.va = std::move(va);
            return res;
        }
    }
    res.converged = true;
    res.vm = std::move(vm);
    res.va = std::move(va);
    return res;
}

std::vector<NodeType> default_types(const grid::NetworkCase& net) {
    std::vector<NodeType> types(net.buses.size(), NodeType::pq);
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        if (b.role == grid::BusRole::slack) {
            types[i] = NodeType::ref;
        } else if (b.role == grid::BusRole::pv) {
            for (const auto& g : net.generators)
                if (g.bus == b.id && controls_voltage(g)) types[i] = NodeType::pv;
        }
    }
    return types;
}

}  // namespace detail

void check_options(const grid::NetworkCase& net, const SolverOptions& options) {
    for (const auto& g : net.generators) {
        if (!g.in_service) continue;
        const double marginal = g.cost_c1 + 2.0 * g.cost_c2 * g.pmax;
        if (!(options.shed_penalty > marginal))
            throw std::invalid_argument("shed penalty " + std::to_string(options.shed_penalty) +
                                        " does not exceed generator " + std::to_string(g.id) +
                                        " marginal cost " + std::to_string(marginal));
    }
    if (!(options.pf_tolerance > 0.0)) throw std::invalid_argument("pf_tolerance must be > 0");
    if (options.max_pf_iterations < 1) throw std::invalid_argument("max_pf_iterations must be >= 1");
}

AdmittanceMatrix build_ybus(const grid::NetworkCase& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (const auto& line : detail::in_service_lines(net)) {
        const auto f = static_cast<Eigen::Index>(line.from);
        const auto t = static_cast<Eigen::Index>(line.to);
        triplets.emplace_back(f, f, line.yff);
        triplets.emplace_back(t, t, line.yff);
        triplets.emplace_back(f, t, line.yft);
        triplets.emplace_back(t, f, line.yft);
    }
    AdmittanceMatrix y(n, n);
    y.setFromTriplets(triplets.begin(), triplets.end());
    y.makeCompressed();
    return y;
}

std::vector<BusInjection> scheduled_injections(const grid::NetworkCase& net, const std::vector<double>& gen_p_mw) {
    if (gen_p_mw.size() != net.generators.size())
        throw std::invalid_argument("dispatch vector size does not match generator count");
    std::vector<BusInjection> inj(net.buses.size());
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        const auto& g = net.generators[k];
        if (!g.in_service) continue;
        inj[*net.bus_index(g.bus)].p_mw += gen_p_mw[k];
    }
    for (const auto& l : net.loads) {
        auto& b = inj[*net.bus_index(l.bus)];
        b.p_mw -= l.p;
        b.q_mvar -= l.q;
    }
    return inj;
}

double full_mismatch(const grid::NetworkCase& net, const std::vector<double>& vm, const std::vector<double>& va,
                     const std::vector<BusInjection>& injections) {
    const auto s = detail::calc_injections(build_ybus(net), detail::voltages(vm, va));
    double worst = 0.0;
    for (std::size_t i = 0; i < injections.size(); ++i) {
        const Complex spec(injections[i].p_mw / net.base_mva, injections[i].q_mvar / net.base_mva);
        worst = std::max(worst, std::abs(s[static_cast<Eigen::Index>(i)] - spec));
    }
    return worst;
}

PowerFlowSolution solve_powerflow(const grid::NetworkCase& net, const std::vector<BusInjection>& injections,
                                  const SolverOptions& options, const std::optional<WarmStart>& warm) {
    const std::size_t n = net.buses.size();
    if (injections.size() != n) throw std::invalid_argument("injection vector size does not match bus count");
    const auto types = detail::default_types(net);

    std::vector<double> vm(n, 1.0), va(n, 0.0);
    if (warm && warm->vm.size() == n && warm->va.size() == n) {
        vm = warm->vm;
        va = warm->va;
    }
    Eigen::VectorXcd spec(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = net.buses[i];
        if (types[i] != detail::NodeType::pq) vm[i] = std::clamp(b.vset, b.vmin, b.vmax);
        if (types[i] == detail::NodeType::ref) va[i] = 0.0;
        spec[static_cast<Eigen::Index>(i)] =
            Complex(injections[i].p_mw / net.base_mva, injections[i].q_mvar / net.base_mva);
    }

    const auto ybus = build_ybus(net);
    auto nr = detail::newton_raphson(ybus, types, spec, std::move(vm), std::move(va), options.pf_tolerance,
                                     options.max_pf_iterations);

    PowerFlowSolution sol;
    for (const auto& b : net.buses) sol.bus_ids.push_back(b.id);
    sol.iterations = nr.iterations;
    sol.max_mismatch = nr.max_mismatch;
    sol.converged = nr.converged;
    sol.diagnostic = std::move(nr.diagnostic);
    sol.vm = std::move(nr.vm);
    sol.va = std::move(nr.va);
    const auto s = detail::calc_injections(ybus, detail::voltages(sol.vm, sol.va));
    sol.injection.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.injection[i] = {s[static_cast<Eigen::Index>(i)].real() * net.base_mva,
                            s[static_cast<Eigen::Index>(i)].imag() * net.base_mva};
    }
    return sol;
}

}  // namespace v2g::acopf
