#pragma once

#include "v2g/fleet.hpp"

#include <string>
#include <vector>

namespace v2g::endurance {

struct FleetEntry {
    std::string label;
    double usable_kwh = 0.0;
    double count = 0.0;
    bool is_phev = false;
};

using FleetComposition = std::vector<FleetEntry>;

/// Groups registrations by make/model/capacity/PHEV flag across all zips.
FleetComposition composition_from_registrations(const std::vector<fleet::Registration>& regs);

/// Hours a vehicle can discharge at a constant rate.
double vehicle_endurance(double usable_kwh, double power_kw, double initial_soc = 1.0);

struct EnduranceCurve {
    std::vector<double> time_h;
    std::vector<double> fraction_remaining;
};

/// Share of vehicles whose endurance is >= t. A vehicle that runs out
/// exactly at t still counts.
double fraction_remaining(const FleetComposition& fleet, double power_kw, double t_hours, double initial_soc = 1.0);

/// Fraction remaining sampled at 0, step, 2*step, ... <= horizon.
EnduranceCurve curve(const FleetComposition& fleet, double power_kw, double horizon_h, double step_h,
                     double initial_soc = 1.0);

/// Largest vehicle endurance t with fraction_remaining(t) >= fraction.
double duration_quantile(const FleetComposition& fleet, double power_kw, double fraction, double initial_soc = 1.0);

std::string to_csv(const EnduranceCurve& curve);

}  // namespace v2g::endurance
