#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2g::fleet {

/// One row of the registrations table. purchase_year is optional; when
/// absent for a zip, its vehicles are spread uniformly over cohort ages.
struct Registration {
    std::string zip;
    std::string make;
    std::string model;
    double count = 0.0;
    double usable_kwh = 0.0;
    bool is_phev = false;
    std::optional<int> purchase_year;
};

std::vector<Registration> parse_registrations_csv(std::string_view text);

/// Sum of counts per zip.
std::map<std::string, double> ev_counts_by_zip(const std::vector<Registration>& regs);

using YearSeries = std::map<int, double>;

struct FleetParams {
    int vehicle_lifetime = 15;
    double ownership_rate = 0.8;       // vehicles per resident, constant
    double incentive_multiplier = 1.0; // scales the base share growth
    YearSeries population_growth;      // fractional growth for the year ending at key
    YearSeries base_share_growth;      // fractional change in EV share of new sales
    std::map<std::string, YearSeries> population_growth_by_zip;
    std::map<std::string, double> zip_population;  // residents in the base year
    std::optional<double> initial_ev_share;        // default: EV stock / total stock
};

/// Throws ModelError when an invariant fails.
void validate(const FleetParams& params);
FleetParams parse_params(std::string_view json_text);

struct ZipFleet {
    double total_stock = 0.0;
    std::vector<double> cohorts;  // EVs by age, index 0 = newest
    double ev_share = 0.0;        // of new-vehicle sales

    double ev_stock() const;
};

struct FleetState {
    int year = 0;
    std::map<std::string, ZipFleet> zips;
};

/// Per-zip registrations, optionally with a purchase-year histogram.
struct ZipRegistrations {
    double count = 0.0;
    std::map<int, double> by_purchase_year;  // empty = uniform-age assumption
};

std::map<std::string, ZipRegistrations> group_registrations(const std::vector<Registration>& regs);

/// Base-year state. Without purchase years, count/lifetime vehicles go to
/// each age and the remainder to the youngest cohorts, one each.
FleetState initialize(const std::map<std::string, ZipRegistrations>& registrations, const FleetParams& params,
                      int base_year);

/// Flows of a single zip over one step, for auditing.
struct StepFlows {
    double retired_evs = 0.0;
    double retirements = 0.0;
    double new_sales = 0.0;
    double new_evs = 0.0;
};

/// Advances one year: retire the cohort reaching the lifetime, grow the
/// stock, replace retirements plus growth with new sales, update the EV
/// share, and add the new EV cohort.
FleetState step_year(const FleetState& state, const FleetParams& params,
                     std::map<std::string, StepFlows>* flows = nullptr);

struct FleetProjection {
    std::map<int, std::map<std::string, double>> ev_count;  // year -> zip -> EVs (fractional)

    /// Reported count, rounded half-up.
    long long rounded(int year, const std::string& zip) const;
};

FleetProjection project(const std::map<std::string, ZipRegistrations>& registrations, const FleetParams& params,
                        int base_year, const std::vector<int>& target_years);

std::string to_json(const FleetProjection& projection);

}  // namespace v2g::fleet
