#include "v2g/endurance.hpp"

#include "v2g/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

namespace v2g::endurance {

namespace {

double checked_total(const FleetComposition& fleet) {
    double total = 0.0;
    for (const auto& e : fleet) {
        if (!(e.usable_kwh > 0.0)) throw ModelError("fleet entry '" + e.label + "': usable kWh must be > 0");
        if (e.count < 0.0) throw ModelError("fleet entry '" + e.label + "': negative count");
        total += e.count;
    }
    if (!(total > 0.0)) throw ModelError("fleet has no vehicles");
    return total;
}

void check_soc(double soc) {
    if (!(soc > 0.0 && soc <= 1.0)) throw ModelError("initial state of charge must be in (0, 1]");
}

}  // namespace

FleetComposition composition_from_registrations(const std::vector<fleet::Registration>& regs) {
    std::map<std::tuple<std::string, std::string, double, bool>, double> grouped;
    for (const auto& r : regs) grouped[{r.make, r.model, r.usable_kwh, r.is_phev}] += r.count;
    FleetComposition out;
    for (const auto& [key, count] : grouped) {
        const auto& [make, model, kwh, phev] = key;
        out.push_back({make + " " + model, kwh, count, phev});
    }
    return out;
}

double vehicle_endurance(double usable_kwh, double power_kw, double initial_soc) {
    if (!(power_kw > 0.0)) throw ModelError("discharge power must be > 0");
    check_soc(initial_soc);
    return usable_kwh * initial_soc / power_kw;
}

double fraction_remaining(const FleetComposition& fleet, double power_kw, double t_hours, double initial_soc) {
    const double total = checked_total(fleet);
    double remaining = 0.0;
    for (const auto& e : fleet)
        if (vehicle_endurance(e.usable_kwh, power_kw, initial_soc) >= t_hours) remaining += e.count;
    return remaining / total;
}

EnduranceCurve curve(const FleetComposition& fleet, double power_kw, double horizon_h, double step_h,
                     double initial_soc) {
    if (!(horizon_h > 0.0) || !(step_h > 0.0)) throw ModelError("horizon and step must be > 0");
    checked_total(fleet);
    EnduranceCurve c;
    const auto steps = static_cast<long>(std::floor(horizon_h / step_h + 1e-9));
    for (long k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * step_h;
        c.time_h.push_back(t);
        c.fraction_remaining.push_back(fraction_remaining(fleet, power_kw, t, initial_soc));
    }
    return c;
}

double duration_quantile(const FleetComposition& fleet, double power_kw, double fraction, double initial_soc) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ModelError("fraction must be in (0, 1]");
    const double total = checked_total(fleet);
    std::vector<std::pair<double, double>> by_endurance;
    for (const auto& e : fleet)
        if (e.count > 0.0) by_endurance.emplace_back(vehicle_endurance(e.usable_kwh, power_kw, initial_soc), e.count);
    std::sort(by_endurance.begin(), by_endurance.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double cumulative = 0.0;
    for (std::size_t k = 0; k < by_endurance.size(); ++k) {
        cumulative += by_endurance[k].second;
        const bool group_end = k + 1 == by_endurance.size() || by_endurance[k + 1].first != by_endurance[k].first;
        if (group_end && cumulative >= fraction * total * (1.0 - 1e-12)) return by_endurance[k].first;
    }
    return by_endurance.back().first;
}

std::string to_csv(const EnduranceCurve& curve) {
    std::string out = "time_h,fraction\n";
    char buf[96];
    for (std::size_t k = 0; k < curve.time_h.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.6g,%.10g\n", curve.time_h[k], curve.fraction_remaining[k]);
        out += buf;
    }
    return out;
}

}  // namespace v2g::endurance
