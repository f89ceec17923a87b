#include "dispatch_lp.hpp"
#include "v2g/error.hpp"
#include "v2g/opf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace v2g::acopf {

namespace detail {

int add_generator(lp::LinearProgram& program, const grid::Generator& g, int rank, double lo, double hi) {
    const double tie = kTieBreakCost * rank;
    if (g.cost_c2 == 0.0 || g.pmax <= g.pmin) return program.add_variable(g.cost_c1 + tie, lo, hi);

    const int p = program.add_variable(tie, lo, hi);
    const double width = (g.pmax - g.pmin) / kCostSegments;
    std::vector<lp::LinearProgram::Term> terms{{p, 1.0}};
    for (int k = 0; k < kCostSegments; ++k) {
        const double slope = g.cost_c1 + g.cost_c2 * (2.0 * g.pmin + (2.0 * k + 1.0) * width);
        terms.emplace_back(program.add_variable(slope, 0.0, width), -1.0);
    }
    program.add_row(std::move(terms), g.pmin, g.pmin);
    return p;
}

std::map<int, int> generator_ranks(const grid::NetworkCase& net) {
    std::vector<int> ids;
    for (const auto& g : net.generators)
        if (g.in_service) ids.push_back(g.id);
    std::sort(ids.begin(), ids.end());
    std::map<int, int> rank;
    for (std::size_t k = 0; k < ids.size(); ++k) rank[ids[k]] = static_cast<int>(k);
    return rank;
}

std::map<int, int> load_ranks(const grid::NetworkCase& net) {
    std::vector<int> ids;
    for (const auto& l : net.loads) ids.push_back(l.id);
    std::sort(ids.begin(), ids.end());
    std::map<int, int> rank;
    for (std::size_t k = 0; k < ids.size(); ++k) rank[ids[k]] = static_cast<int>(k);
    return rank;
}

double shed_cost(double penalty, int rank) { return penalty + kTieBreakCost * rank; }

double generator_cost(const grid::Generator& g, int rank, double p) {
    const double tie = kTieBreakCost * rank * p;
    if (g.cost_c2 == 0.0 || g.pmax <= g.pmin) return tie + g.cost_c1 * p;
    const double width = (g.pmax - g.pmin) / kCostSegments;
    double cost = tie;
    for (int k = 0; k < kCostSegments; ++k) {
        const double slope = g.cost_c1 + g.cost_c2 * (2.0 * g.pmin + (2.0 * k + 1.0) * width);
        cost += slope * std::clamp(p - g.pmin - k * width, 0.0, width);
    }
    return cost;
}

}  // namespace detail

std::string_view to_string(DispatchStatus s) {
    switch (s) {
        case DispatchStatus::optimal: return "optimal";
        case DispatchStatus::shed_required: return "shed_required";
        case DispatchStatus::failed: return "failed";
    }
    return "failed";
}

DispatchStatus parse_status(std::string_view s) {
    if (s == "optimal") return DispatchStatus::optimal;
    if (s == "shed_required") return DispatchStatus::shed_required;
    if (s == "failed") return DispatchStatus::failed;
    throw ParseError("unknown dispatch status '" + std::string(s) + "'");
}

double feasibility_gap(const DispatchResult& result) {
    if (result.status == DispatchStatus::failed)
        throw ModelError("feasibility gap undefined for a failed dispatch: " + result.diagnostic);
    return result.total_shed_fraction * 100.0;
}

std::string format_percent(double pct) {
    if (pct == 0.0 || !std::isfinite(pct)) return pct == 0.0 ? "0.00" : std::to_string(pct);
    char buf[64];
    // Round to 3 significant figures first so 9.996 prints as "10.0".
    std::snprintf(buf, sizeof buf, "%.2e", pct);
    const double rounded = std::strtod(buf, nullptr);
    const int exponent = static_cast<int>(std::floor(std::log10(std::abs(rounded))));
    const int decimals = std::max(0, 2 - exponent);
    std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
    return buf;
}

std::string to_json(const DispatchResult& result) {
    nlohmann::ordered_json doc;
    doc["status"] = std::string(to_string(result.status));
    doc["total_shed_fraction"] = result.total_shed_fraction;
    doc["shed_by_load"] = nlohmann::ordered_json::object();
    for (const auto& [id, mw] : result.shed_by_load) doc["shed_by_load"][std::to_string(id)] = mw;
    doc["dispatch"] = nlohmann::ordered_json::object();
    for (const auto& [id, sp] : result.dispatch)
        doc["dispatch"][std::to_string(id)] = {{"p", sp.p}, {"q", sp.q}};
    doc["cost"] = result.generation_cost;
    doc["pf"] = {{"iterations", result.solution.iterations}, {"max_mismatch", result.solution.max_mismatch}};
    if (!result.diagnostic.empty()) doc["diagnostic"] = result.diagnostic;
    return doc.dump(2);
}

}  // namespace v2g::acopf
