#include "ac_network.hpp"
#include "dispatch_lp.hpp"
#include "v2g/error.hpp"
#include "v2g/opf.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace v2g::acopf {

namespace {

using detail::NodeType;
using Terms = std::vector<lp::LinearProgram::Term>;

constexpr double kElasticWeight = 10.0;  // times the shed penalty
constexpr double kElasticTolerance = 1e-6;
// The LP's promised improvement counts as nothing below this share of the
// merit, or of the generation cost alone, whichever is larger.
constexpr double kStationaryTolerance = 1e-8;
constexpr double kCostStationaryTolerance = 1e-5;
constexpr double kAcceptRatio = 0.1;
constexpr double kExpandRatio = 0.75;
constexpr int kMaxRejections = 12;
// Reference-bus residual small enough to be power-flow noise, per-unit.
constexpr double kResidualTolerancePu = 1e-7;

/// Affine function of the dispatch vector.
struct Affine {
    double constant = 0.0;
    std::vector<double> coef;
};

struct Linearization {
    Eigen::VectorXcd s_calc;  // p.u.
    Eigen::MatrixXcd ds_dva, ds_dvm;
    Eigen::MatrixXd jinv;
    Eigen::VectorXcd v;
};

class AcDispatchProblem {
public:
    AcDispatchProblem(const grid::NetworkCase& net, const SolverOptions& options)
        : net_(net), opt_(options), n_(net.buses.size()), base_(net.base_mva) {}

    DispatchResult solve();

private:
    // One limit of the linearized model: lo <= constant + coef . x <= hi,
    // where x is the dispatch vector (MW).
    struct Row {
        std::vector<double> coef;
        double constant = 0.0;
        double lo = 0.0;
        double hi = 0.0;

        double value(const std::vector<double>& x) const {
            double v = constant;
            for (std::size_t k = 0; k < x.size(); ++k) v += coef[k] * x[k];
            return v;
        }
        double violation(const std::vector<double>& x) const {
            const double v = value(x);
            return std::max({0.0, v - hi, lo - v});
        }
    };

    // An AC-solved dispatch with its linearization and score.
    struct Point {
        std::vector<double> x;
        detail::NrResult nr;
        std::vector<Row> rows;
        double merit = 0.0;
        double violation = 0.0;     // summed row violations (MW, MVAr, voltage percent, MVA)
        double ref_residual = 0.0;  // reference-bus MW beyond its units' limits
    };

    bool setup(std::string& diagnostic);
    Eigen::VectorXcd spec_pu(const std::vector<double>& dispatch) const;
    bool linearize(const std::vector<double>& vm, const std::vector<double>& va, Linearization& lin) const;
    Affine through(const Linearization& lin, const Eigen::VectorXd& gradient, double y0) const;
    Eigen::VectorXd bus_gradient(const Linearization& lin, std::size_t bus, bool reactive) const;
    Affine line_flow(const Linearization& lin, const detail::Line& line, bool reactive) const;
    std::vector<Row> build_rows(const Linearization& lin) const;
    lp::Solution solve_lp(const std::vector<Row>& rows, const std::vector<double>& offsets,
                          const std::vector<double>& center, double radius, std::vector<double>& dispatch,
                          double& elastic) const;
    detail::NrResult run_nr(const std::vector<double>& dispatch, const std::vector<double>& vm,
                            const std::vector<double>& va) const;
    std::vector<double> initial_dispatch() const;
    double objective(const std::vector<double>& x) const;
    double generation_cost(const std::vector<double>& x) const;
    double stationary_threshold(const Point& pt) const;
    std::optional<Point> evaluate(std::vector<double> x, const std::vector<double>& vm,
                                  const std::vector<double>& va) const;
    DispatchResult assemble(const Point& pt) const;
    DispatchResult failed(std::string diagnostic) const;

    const grid::NetworkCase& net_;
    const SolverOptions& opt_;
    std::size_t n_;
    double base_;

    std::vector<NodeType> types_;
    std::size_t ref_ = 0;
    AdmittanceMatrix ybus_;
    std::vector<detail::Line> lines_;
    detail::StateIndex idx_;

    // Dispatch vector layout: in-service generators, then shed variables.
    std::vector<std::size_t> gens_;
    std::vector<std::size_t> sheds_;
    std::vector<std::size_t> gen_bus_, shed_bus_;
    std::vector<std::size_t> ref_gens_;  // dispatch positions at the reference bus, by id
    std::map<int, int> gen_rank_, load_rank_;
    std::vector<double> p_load_, q_load_, q_fixed_, q_lo_, q_hi_;
    // Reduced power-flow equations as affine functions of dispatch (MW).
    std::vector<Terms> eq_terms_;
    std::vector<double> eq_const_;
    mutable std::string last_nr_diagnostic_;

    std::size_t nv() const { return gens_.size() + sheds_.size(); }
    double shed_q_ratio(std::size_t s) const {
        const auto& l = net_.loads[sheds_[s]];
        return l.p > 0.0 ? l.q / l.p : 0.0;
    }
};

DispatchResult AcDispatchProblem::failed(std::string diagnostic) const {
    DispatchResult r;
    r.status = DispatchStatus::failed;
    r.diagnostic = std::move(diagnostic);
    for (const auto& l : net_.loads) r.shed_by_load[l.id] = 0.0;
    return r;
}

bool AcDispatchProblem::setup(std::string& diagnostic) {
    // Reference bus: the slack bus when it can hold voltage, otherwise the
    // voltage-controlling bus with the most in-service capacity.
    std::vector<double> controlling_capacity(n_, 0.0);
    std::vector<bool> controls(n_, false);
    for (const auto& g : net_.generators) {
        if (!detail::controls_voltage(g)) continue;
        const auto b = *net_.bus_index(g.bus);
        controls[b] = true;
        controlling_capacity[b] += g.pmax;
    }
    std::optional<std::size_t> ref;
    for (std::size_t i = 0; i < n_; ++i)
        if (net_.buses[i].role == grid::BusRole::slack && controls[i]) ref = i;
    if (!ref) {
        for (std::size_t i = 0; i < n_; ++i) {
            if (!controls[i]) continue;
            if (!ref || controlling_capacity[i] > controlling_capacity[*ref] ||
                (controlling_capacity[i] == controlling_capacity[*ref] && net_.buses[i].id < net_.buses[*ref].id))
                ref = i;
        }
    }
    if (!ref) {
        diagnostic = "no in-service generator can hold the reference voltage";
        return false;
    }
    ref_ = *ref;
    types_.assign(n_, NodeType::pq);
    for (std::size_t i = 0; i < n_; ++i)
        if (controls[i] && net_.buses[i].role != grid::BusRole::pq) types_[i] = NodeType::pv;
    types_[ref_] = NodeType::ref;

    ybus_ = build_ybus(net_);
    gen_rank_ = detail::generator_ranks(net_);
    load_rank_ = detail::load_ranks(net_);
    lines_ = detail::in_service_lines(net_);
    idx_ = detail::make_index(types_);

    p_load_.assign(n_, 0.0);
    q_load_.assign(n_, 0.0);
    q_fixed_.assign(n_, 0.0);
    q_lo_.assign(n_, 0.0);
    q_hi_.assign(n_, 0.0);
    for (std::size_t k = 0; k < net_.generators.size(); ++k) {
        const auto& g = net_.generators[k];
        if (!g.in_service) continue;
        const auto b = *net_.bus_index(g.bus);
        gens_.push_back(k);
        gen_bus_.push_back(b);
        q_lo_[b] += g.qmin;
        q_hi_[b] += g.qmax;
        if (types_[b] == NodeType::pq) q_fixed_[b] += std::clamp(0.0, g.qmin, g.qmax);
    }
    for (std::size_t j = 0; j < gens_.size(); ++j)
        if (gen_bus_[j] == ref_) ref_gens_.push_back(j);
    std::sort(ref_gens_.begin(), ref_gens_.end(), [&](std::size_t a, std::size_t b) {
        return net_.generators[gens_[a]].id < net_.generators[gens_[b]].id;
    });
    for (std::size_t k = 0; k < net_.loads.size(); ++k) {
        const auto& l = net_.loads[k];
        const auto b = *net_.bus_index(l.bus);
        p_load_[b] += l.p;
        q_load_[b] += l.q;
        if (l.sheddable && l.p > 0.0) {
            sheds_.push_back(k);
            shed_bus_.push_back(b);
        }
    }

    eq_terms_.assign(idx_.size(), {});
    eq_const_.assign(idx_.size(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        if (idx_.angle_pos[i] >= 0) eq_const_[static_cast<std::size_t>(idx_.angle_pos[i])] = -p_load_[i];
        if (idx_.magnitude_pos[i] >= 0)
            eq_const_[static_cast<std::size_t>(idx_.magnitude_pos[i])] = q_fixed_[i] - q_load_[i];
    }
    for (std::size_t j = 0; j < gens_.size(); ++j) {
        const int pos = idx_.angle_pos[gen_bus_[j]];
        if (pos >= 0) eq_terms_[static_cast<std::size_t>(pos)].emplace_back(static_cast<int>(j), 1.0);
    }
    for (std::size_t s = 0; s < sheds_.size(); ++s) {
        const int var = static_cast<int>(gens_.size() + s);
        const int ppos = idx_.angle_pos[shed_bus_[s]];
        if (ppos >= 0) eq_terms_[static_cast<std::size_t>(ppos)].emplace_back(var, 1.0);
        const int qpos = idx_.magnitude_pos[shed_bus_[s]];
        if (qpos >= 0 && shed_q_ratio(s) != 0.0)
            eq_terms_[static_cast<std::size_t>(qpos)].emplace_back(var, shed_q_ratio(s));
    }
    return true;
}

Eigen::VectorXcd AcDispatchProblem::spec_pu(const std::vector<double>& dispatch) const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(n_)), q(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
        p[static_cast<Eigen::Index>(i)] = -p_load_[i];
        q[static_cast<Eigen::Index>(i)] = q_fixed_[i] - q_load_[i];
    }
    for (std::size_t j = 0; j < gens_.size(); ++j) p[static_cast<Eigen::Index>(gen_bus_[j])] += dispatch[j];
    for (std::size_t s = 0; s < sheds_.size(); ++s) {
        const double shed = dispatch[gens_.size() + s];
        p[static_cast<Eigen::Index>(shed_bus_[s])] += shed;
        q[static_cast<Eigen::Index>(shed_bus_[s])] += shed * shed_q_ratio(s);
    }
    Eigen::VectorXcd out(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = Complex(p[i], q[i]) / base_;
    return out;
}

bool AcDispatchProblem::linearize(const std::vector<double>& vm, const std::vector<double>& va,
                                  Linearization& lin) const {
    lin.v = detail::voltages(vm, va);
    lin.s_calc = detail::calc_injections(ybus_, lin.v);
    detail::power_derivatives(ybus_, lin.v, lin.ds_dva, lin.ds_dvm);
    const Eigen::MatrixXd jac = detail::jacobian(lin.ds_dva, lin.ds_dvm, idx_);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return false;
    lin.jinv = lu.inverse();
    return true;
}

// y(dispatch) ~= y0 + gradient' * Jinv * (s(dispatch) - s_calc) / base
Affine AcDispatchProblem::through(const Linearization& lin, const Eigen::VectorXd& gradient, double y0) const {
    const Eigen::VectorXd w = lin.jinv.transpose() * gradient;
    Affine out{y0, std::vector<double>(nv(), 0.0)};
    for (std::size_t k = 0; k < idx_.size(); ++k) {
        const double wk = w[static_cast<Eigen::Index>(k)];
        if (wk == 0.0) continue;
        const bool is_p = k < idx_.pvpq.size();
        const std::size_t bus = is_p ? idx_.pvpq[k] : idx_.pq[k - idx_.pvpq.size()];
        const Complex s = lin.s_calc[static_cast<Eigen::Index>(bus)] * base_;
        out.constant += wk * (eq_const_[k] - (is_p ? s.real() : s.imag())) / base_;
        for (const auto& [var, a] : eq_terms_[k]) out.coef[static_cast<std::size_t>(var)] += wk * a / base_;
    }
    return out;
}

Eigen::VectorXd AcDispatchProblem::bus_gradient(const Linearization& lin, std::size_t bus, bool reactive) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx_.size()));
    const auto b = static_cast<Eigen::Index>(bus);
    auto part = [reactive](Complex c) { return reactive ? c.imag() : c.real(); };
    for (std::size_t k = 0; k < idx_.pvpq.size(); ++k)
        g[static_cast<Eigen::Index>(k)] = part(lin.ds_dva(b, static_cast<Eigen::Index>(idx_.pvpq[k])));
    for (std::size_t k = 0; k < idx_.pq.size(); ++k)
        g[static_cast<Eigen::Index>(idx_.pvpq.size() + k)] =
            part(lin.ds_dvm(b, static_cast<Eigen::Index>(idx_.pq[k])));
    return g;
}

Affine AcDispatchProblem::line_flow(const Linearization& lin, const detail::Line& line, bool reactive) const {
    const Complex j(0.0, 1.0);
    const Complex vf = lin.v[static_cast<Eigen::Index>(line.from)];
    const Complex vt = lin.v[static_cast<Eigen::Index>(line.to)];
    const Complex i_f = line.yff * vf + line.yft * vt;
    const Complex sf = vf * std::conj(i_f);
    const Complex dva_f = j * vf * std::conj(i_f) + vf * std::conj(line.yff * j * vf);
    const Complex dva_t = vf * std::conj(line.yft * j * vt);
    const Complex dvm_f = std::conj(i_f) * vf / std::abs(vf) + vf * std::conj(line.yff * vf / std::abs(vf));
    const Complex dvm_t = vf * std::conj(line.yft * vt / std::abs(vt));

    auto part = [reactive](Complex c) { return reactive ? c.imag() : c.real(); };
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx_.size()));
    auto add = [&](std::size_t bus, Complex d_angle, Complex d_mag) {
        if (idx_.angle_pos[bus] >= 0) g[idx_.angle_pos[bus]] += part(d_angle);
        if (idx_.magnitude_pos[bus] >= 0) g[idx_.magnitude_pos[bus]] += part(d_mag);
    };
    add(line.from, dva_f, dvm_f);
    add(line.to, dva_t, dvm_t);
    return through(lin, g, part(sf));
}

std::vector<AcDispatchProblem::Row> AcDispatchProblem::build_rows(const Linearization& lin) const {
    std::vector<Row> rows;
    auto from_affine = [&](const Affine& a, double scale, double lo, double hi) {
        Row r{std::vector<double>(nv()), scale * a.constant, lo, hi};
        for (std::size_t k = 0; k < nv(); ++k) r.coef[k] = scale * a.coef[k];
        return r;
    };

    // Reference-bus active balance: its generators cover whatever the network
    // draws there.
    {
        const Affine p_ref =
            through(lin, bus_gradient(lin, ref_, false), lin.s_calc[static_cast<Eigen::Index>(ref_)].real());
        Row r = from_affine(p_ref, -base_, p_load_[ref_], p_load_[ref_]);
        for (std::size_t j : ref_gens_) r.coef[j] += 1.0;
        for (std::size_t s = 0; s < sheds_.size(); ++s)
            if (shed_bus_[s] == ref_) r.coef[gens_.size() + s] += 1.0;
        rows.push_back(std::move(r));
    }

    // Reactive capability at voltage-controlled buses.
    for (std::size_t i = 0; i < n_; ++i) {
        if (types_[i] == NodeType::pq) continue;
        const Affine q = through(lin, bus_gradient(lin, i, true), lin.s_calc[static_cast<Eigen::Index>(i)].imag());
        Row r = from_affine(q, base_, q_lo_[i] - q_load_[i], q_hi_[i] - q_load_[i]);
        for (std::size_t s = 0; s < sheds_.size(); ++s)
            if (shed_bus_[s] == i) r.coef[gens_.size() + s] -= shed_q_ratio(s);
        rows.push_back(std::move(r));
    }

    // Voltage magnitude limits at pq buses, in percent.
    if (opt_.enforce_voltage_limits) {
        for (auto i : idx_.pq) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx_.size()));
            g[idx_.magnitude_pos[i]] = 1.0;
            const Affine vmag = through(lin, g, std::abs(lin.v[static_cast<Eigen::Index>(i)]));
            const auto& b = net_.buses[i];
            rows.push_back(from_affine(vmag, 100.0, 100.0 * b.vmin, 100.0 * b.vmax));
        }
    }

    // From-end MVA ratings via the tangent plane of |S| at the current flow.
    if (opt_.enforce_line_limits) {
        for (const auto& line : lines_) {
            if (!(line.rating_pu > 0.0)) continue;
            const Affine pf = line_flow(lin, line, false);
            const Affine qf = line_flow(lin, line, true);
            const Complex vf = lin.v[static_cast<Eigen::Index>(line.from)];
            const Complex vt = lin.v[static_cast<Eigen::Index>(line.to)];
            const Complex sf = vf * std::conj(line.yff * vf + line.yft * vt);
            const double mag = std::abs(sf);
            const double cp = mag < 1e-9 ? 1.0 : sf.real() / mag;
            const double cq = mag < 1e-9 ? 0.0 : sf.imag() / mag;
            Affine combined{cp * pf.constant + cq * qf.constant, std::vector<double>(nv(), 0.0)};
            for (std::size_t k = 0; k < nv(); ++k) combined.coef[k] = cp * pf.coef[k] + cq * qf.coef[k];
            rows.push_back(from_affine(combined, base_, -lp::kInf, line.rating_pu * base_));
        }
    }
    return rows;
}

lp::Solution AcDispatchProblem::solve_lp(const std::vector<Row>& rows, const std::vector<double>& offsets,
                                         const std::vector<double>& center, double radius,
                                         std::vector<double>& dispatch, double& elastic) const {
    lp::LinearProgram prog;
    const double elastic_cost = kElasticWeight * opt_.shed_penalty;

    std::vector<int> var(nv());
    for (std::size_t j = 0; j < gens_.size(); ++j) {
        const auto& g = net_.generators[gens_[j]];
        const double c = std::clamp(center[j], g.pmin, g.pmax);
        var[j] = detail::add_generator(prog, g, gen_rank_.at(g.id), std::max(g.pmin, c - radius),
                                       std::min(g.pmax, c + radius));
    }
    for (std::size_t s = 0; s < sheds_.size(); ++s) {
        const auto& l = net_.loads[sheds_[s]];
        const std::size_t k = gens_.size() + s;
        const double c = std::clamp(center[k], 0.0, l.p);
        var[k] = prog.add_variable(detail::shed_cost(opt_.shed_penalty, load_rank_.at(l.id)),
                                   std::max(0.0, c - radius), std::min(l.p, c + radius));
    }

    std::vector<int> elastic_vars;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        Terms terms;
        for (std::size_t k = 0; k < nv(); ++k)
            if (std::abs(row.coef[k]) > 1e-12) terms.emplace_back(var[k], row.coef[k]);
        const int up = prog.add_variable(elastic_cost, 0.0);
        const int down = prog.add_variable(elastic_cost, 0.0);
        elastic_vars.push_back(up);
        elastic_vars.push_back(down);
        terms.emplace_back(up, 1.0);
        terms.emplace_back(down, -1.0);
        const double shift = row.constant + (offsets.empty() ? 0.0 : offsets[i]);
        prog.add_row(std::move(terms), row.lo - shift, row.hi - shift);
    }

    auto sol = lp::solve(prog);
    if (sol.status != lp::Status::optimal) return sol;
    dispatch.assign(nv(), 0.0);
    for (std::size_t k = 0; k < nv(); ++k) dispatch[k] = sol.x[static_cast<std::size_t>(var[k])];
    elastic = 0.0;
    for (int e : elastic_vars) elastic += sol.x[static_cast<std::size_t>(e)];
    return sol;
}

detail::NrResult AcDispatchProblem::run_nr(const std::vector<double>& dispatch, const std::vector<double>& vm,
                                           const std::vector<double>& va) const {
    return detail::newton_raphson(ybus_, types_, spec_pu(dispatch), vm, va, opt_.pf_tolerance,
                                  opt_.max_pf_iterations);
}

std::vector<double> AcDispatchProblem::initial_dispatch() const {
    std::vector<double> x(nv(), 0.0);
    double capacity = 0.0;
    for (auto k : gens_) capacity += net_.generators[k].pmax;
    double load = 0.0, sheddable = 0.0;
    for (const auto& l : net_.loads) load += l.p;
    for (auto k : sheds_) sheddable += net_.loads[k].p;
    const double scale = capacity > 0.0 ? std::min(1.0, load / capacity) : 0.0;
    for (std::size_t j = 0; j < gens_.size(); ++j) {
        const auto& g = net_.generators[gens_[j]];
        x[j] = std::clamp(g.pmax * scale, g.pmin, g.pmax);
    }
    const double deficit = std::max(0.0, load - capacity);
    if (deficit > 0.0 && sheddable > 0.0)
        for (std::size_t s = 0; s < sheds_.size(); ++s)
            x[gens_.size() + s] = net_.loads[sheds_[s]].p * std::min(1.0, deficit / sheddable);
    return x;
}

double AcDispatchProblem::generation_cost(const std::vector<double>& x) const {
    double total = 0.0;
    for (std::size_t j = 0; j < gens_.size(); ++j) {
        const auto& g = net_.generators[gens_[j]];
        total += detail::generator_cost(g, gen_rank_.at(g.id), x[j]);
    }
    return total;
}

double AcDispatchProblem::stationary_threshold(const Point& pt) const {
    return std::max({kStationaryTolerance * std::max(1.0, std::abs(pt.merit)),
                     kCostStationaryTolerance * std::abs(generation_cost(pt.x))});
}

double AcDispatchProblem::objective(const std::vector<double>& x) const {
    double total = generation_cost(x);
    for (std::size_t k = 0; k < sheds_.size(); ++k)
        total += detail::shed_cost(opt_.shed_penalty, load_rank_.at(net_.loads[sheds_[k]].id)) * x[gens_.size() + k];
    return total;
}

// Solves the AC power flow at x, moves the reference-bus units onto the
// residual it implies, and scores the result exactly as the LP prices it.
std::optional<AcDispatchProblem::Point> AcDispatchProblem::evaluate(std::vector<double> x,
                                                                    const std::vector<double>& vm,
                                                                    const std::vector<double>& va) const {
    Point pt;
    pt.nr = run_nr(x, vm, va);
    if (!pt.nr.converged) {
        last_nr_diagnostic_ = pt.nr.diagnostic;
        return std::nullopt;
    }
    Linearization lin;
    if (!linearize(pt.nr.vm, pt.nr.va, lin)) {
        last_nr_diagnostic_ = "singular power-flow Jacobian at the operating point";
        return std::nullopt;
    }

    double shed_at_ref = 0.0;
    for (std::size_t k = 0; k < sheds_.size(); ++k)
        if (shed_bus_[k] == ref_) shed_at_ref += x[gens_.size() + k];
    double delta = lin.s_calc[static_cast<Eigen::Index>(ref_)].real() * base_ + p_load_[ref_] - shed_at_ref;
    for (std::size_t j : ref_gens_) delta -= x[j];
    for (std::size_t j : ref_gens_) {
        const auto& g = net_.generators[gens_[j]];
        const double before = x[j];
        x[j] = std::clamp(before + delta, g.pmin, g.pmax);
        delta -= x[j] - before;
    }
    pt.ref_residual = delta;

    pt.rows = build_rows(lin);
    for (const auto& row : pt.rows) pt.violation += row.violation(x);
    pt.merit = objective(x) + kElasticWeight * opt_.shed_penalty * pt.violation;
    pt.x = std::move(x);
    return pt;
}

DispatchResult AcDispatchProblem::assemble(const Point& pt) const {
    DispatchResult r;
    const auto s = detail::calc_injections(ybus_, detail::voltages(pt.nr.vm, pt.nr.va));

    std::vector<double> shed_q_at_bus(n_, 0.0);
    for (const auto& l : net_.loads) r.shed_by_load[l.id] = 0.0;
    double total_shed = 0.0;
    for (std::size_t k = 0; k < sheds_.size(); ++k) {
        const double shed = pt.x[gens_.size() + k];
        r.shed_by_load[net_.loads[sheds_[k]].id] = shed;
        shed_q_at_bus[shed_bus_[k]] += shed * shed_q_ratio(k);
        total_shed += shed;
    }

    // Any residual the reference units could not take within their limits is
    // reported on the last of them so the dispatch still balances.
    std::vector<double> p(pt.x.begin(), pt.x.begin() + static_cast<std::ptrdiff_t>(gens_.size()));
    if (!ref_gens_.empty() && std::abs(pt.ref_residual) > kResidualTolerancePu * base_)
        p[ref_gens_.back()] += pt.ref_residual;

    // Reactive output: voltage-controlled buses share the solved Q in
    // proportion to each unit's range; other units sit at their fixed Q.
    std::vector<double> q(gens_.size(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        if (types_[i] == NodeType::pq) continue;
        const double need = s[static_cast<Eigen::Index>(i)].imag() * base_ + q_load_[i] - shed_q_at_bus[i];
        const double range = q_hi_[i] - q_lo_[i];
        const double frac = range > 0.0 ? (need - q_lo_[i]) / range : 0.0;
        for (std::size_t j = 0; j < gens_.size(); ++j) {
            if (gen_bus_[j] != i) continue;
            const auto& g = net_.generators[gens_[j]];
            q[j] = g.qmin + frac * (g.qmax - g.qmin);
        }
    }
    for (std::size_t j = 0; j < gens_.size(); ++j) {
        const auto& g = net_.generators[gens_[j]];
        if (types_[gen_bus_[j]] == NodeType::pq) q[j] = std::clamp(0.0, g.qmin, g.qmax);
        r.dispatch[g.id] = {p[j], q[j]};
        r.generation_cost += g.cost(p[j]);
    }

    const double total_load = net_.total_load_mw();
    r.total_shed_fraction = total_load > 0.0 ? total_shed / total_load : 0.0;
    r.status = r.total_shed_fraction < kShedStatusThreshold ? DispatchStatus::optimal : DispatchStatus::shed_required;

    auto& sol = r.solution;
    for (const auto& b : net_.buses) sol.bus_ids.push_back(b.id);
    sol.vm = pt.nr.vm;
    sol.va = pt.nr.va;
    sol.iterations = pt.nr.iterations;
    sol.max_mismatch = pt.nr.max_mismatch;
    sol.converged = pt.nr.converged;
    sol.injection.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
        sol.injection[i] = {s[static_cast<Eigen::Index>(i)].real() * base_, s[static_cast<Eigen::Index>(i)].imag() * base_};
    return r;
}

DispatchResult AcDispatchProblem::solve() {
    if (auto problems = grid::validate(net_); !problems.empty()) return failed("invalid case: " + problems.front());
    check_options(net_, opt_);
    std::string why;
    if (!setup(why)) return failed(why);

    std::vector<double> vm(n_, 1.0), va(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        const auto& b = net_.buses[i];
        if (types_[i] != NodeType::pq) vm[i] = std::clamp(b.vset, b.vmin, b.vmax);
    }

    int iteration = 0;
    double last_elastic = 0.0;

    // Starting point: proportional dispatch, or failing that one LP step
    // linearized at the flat start.
    auto current = evaluate(initial_dispatch(), vm, va);
    if (!current) {
        Linearization lin;
        if (!linearize(vm, va, lin))
            return failed("singular power-flow Jacobian: a bus has no branch path to the reference bus");
        std::vector<double> x;
        ++iteration;
        const auto lp_sol = solve_lp(build_rows(lin), {}, std::vector<double>(nv(), 0.0), lp::kInf, x, last_elastic);
        if (lp_sol.status != lp::Status::optimal)
            return failed("dispatch LP " + std::string(lp::to_string(lp_sol.status)));
        current = evaluate(std::move(x), vm, va);
        if (!current) return failed("AC power flow failed at the initial dispatch: " + last_nr_diagnostic_);
    }

    // Trust-region SLP on an exact-penalty merit. A rejected step gets one
    // second-order correction: the LP is re-solved with each row shifted by
    // the curvature error observed at the trial point.
    double radius = lp::kInf;
    bool converged = false;
    while (!converged && iteration < opt_.max_opf_iterations) {
        ++iteration;
        // Inner loop: shrink the trust region on the current linearization
        // until a step is accepted or the model stops promising progress.
        for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
            std::vector<double> next;
            double elastic = 0.0;
            const auto lp_sol = solve_lp(current->rows, {}, current->x, radius, next, elastic);
            if (lp_sol.status != lp::Status::optimal)
                return failed("dispatch LP " + std::string(lp::to_string(lp_sol.status)));
            last_elastic = elastic;

            double change = 0.0;
            for (std::size_t v = 0; v < nv(); ++v) change = std::max(change, std::abs(next[v] - current->x[v]));
            const double predicted = current->merit - lp_sol.objective;
            if (change < opt_.opf_tolerance_mw || predicted <= stationary_threshold(*current)) {
                converged = true;
                break;
            }

            auto ratio_of = [&](const std::optional<Point>& t) {
                return t ? (current->merit - t->merit) / predicted : -1.0;
            };
            auto trial = evaluate(next, current->nr.vm, current->nr.va);
            double ratio = ratio_of(trial);
            if (ratio < kAcceptRatio && trial) {
                std::vector<double> offsets(current->rows.size());
                for (std::size_t i = 0; i < offsets.size(); ++i)
                    offsets[i] = trial->rows[i].value(trial->x) - current->rows[i].value(trial->x);
                std::vector<double> corrected;
                double corrected_elastic = 0.0;
                if (solve_lp(current->rows, offsets, current->x, radius, corrected, corrected_elastic).status ==
                    lp::Status::optimal) {
                    auto second = evaluate(std::move(corrected), current->nr.vm, current->nr.va);
                    const double second_ratio = ratio_of(second);
                    if (second_ratio > ratio) {
                        trial = std::move(second);
                        ratio = second_ratio;
                    }
                }
            }
            if (ratio < kAcceptRatio) {
                radius = 0.5 * change;
                continue;
            }
            if (ratio > kExpandRatio && change >= 0.99 * radius) radius *= 2.0;
            current = std::move(trial);
            break;
        }
    }

    if (last_elastic > kElasticTolerance && current->violation > kElasticTolerance)
        return failed("no feasible operating point: limits violated even with full shed");
    DispatchResult result = assemble(*current);
    result.opf_iterations = iteration;
    result.outer_converged = converged;
    if (!converged) result.diagnostic = "outer iteration limit reached; returning last AC-feasible point";
    return result;
}

}  // namespace

DispatchResult solve_opf_with_shed(const grid::NetworkCase& net, const SolverOptions& options) {
    return AcDispatchProblem(net, options).solve();
}

}  // namespace v2g::acopf
