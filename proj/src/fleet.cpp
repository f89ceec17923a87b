#include "v2g/fleet.hpp"

#include "v2g/csv.hpp"
#include "v2g/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace v2g::fleet {

std::vector<Registration> parse_registrations_csv(std::string_view text) {
    const auto t = csv::Table::parse(text, "registrations");
    const auto c_zip = t.column("zip");
    const auto c_count = t.column("count");
    const bool has_make = t.has_column("make");
    const bool has_model = t.has_column("model");
    const bool has_kwh = t.has_column("usable_kwh");
    const bool has_phev = t.has_column("is_phev");
    const bool has_year = t.has_column("purchase_year");

    std::vector<Registration> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        Registration reg;
        reg.zip = t.cell(r, c_zip);
        reg.count = t.required_number(r, c_count);
        if (reg.count < 0.0)
            throw ModelError("registrations: row " + std::to_string(r + 1) + ": negative count for zip " + reg.zip);
        if (has_make) reg.make = t.cell(r, t.column("make"));
        if (has_model) reg.model = t.cell(r, t.column("model"));
        if (has_kwh) reg.usable_kwh = t.number(r, t.column("usable_kwh")).value_or(0.0);
        if (has_phev) {
            const auto& s = t.cell(r, t.column("is_phev"));
            reg.is_phev = s == "1" || s == "true" || s == "TRUE" || s == "True" || s == "yes";
        }
        if (has_year) {
            if (auto y = t.number(r, t.column("purchase_year"))) reg.purchase_year = static_cast<int>(*y);
        }
        out.push_back(std::move(reg));
    }
    return out;
}

std::map<std::string, double> ev_counts_by_zip(const std::vector<Registration>& regs) {
    std::map<std::string, double> out;
    for (const auto& r : regs) out[r.zip] += r.count;
    return out;
}

void validate(const FleetParams& p) {
    if (p.vehicle_lifetime < 1) throw ModelError("vehicle_lifetime must be >= 1");
    if (!(p.ownership_rate > 0.0)) throw ModelError("ownership_rate must be > 0");
    if (!(p.incentive_multiplier > 0.0)) throw ModelError("incentive_multiplier must be > 0");
    if (p.initial_ev_share && (*p.initial_ev_share < 0.0 || *p.initial_ev_share > 1.0))
        throw ModelError("initial_ev_share must be in [0, 1]");
    for (const auto& [zip, pop] : p.zip_population)
        if (pop < 0.0) throw ModelError("zip_population for " + zip + " is negative");
}

namespace {

YearSeries read_series(const nlohmann::json& obj, const std::string& name) {
    YearSeries out;
    if (!obj.is_object()) throw ParseError("fleet params: " + name + " must be an object keyed by year");
    for (const auto& [key, value] : obj.items()) {
        int year = 0;
        try {
            year = std::stoi(key);
        } catch (const std::exception&) {
            throw ParseError("fleet params: " + name + ": key '" + key + "' is not a year");
        }
        if (!value.is_number()) throw ParseError("fleet params: " + name + "." + key + ": expected a number");
        out[year] = value.get<double>();
    }
    return out;
}

}  // namespace

FleetParams parse_params(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("fleet params: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("fleet params: expected an object");
    FleetParams p;
    auto number = [&](const char* key) {
        if (!doc.at(key).is_number()) throw ParseError(std::string("fleet params: ") + key + ": expected a number");
        return doc.at(key).get<double>();
    };
    if (doc.contains("vehicle_lifetime")) {
        if (!doc.at("vehicle_lifetime").is_number_integer())
            throw ParseError("fleet params: vehicle_lifetime: expected an integer");
        p.vehicle_lifetime = doc.at("vehicle_lifetime").get<int>();
    }
    if (doc.contains("ownership_rate")) p.ownership_rate = number("ownership_rate");
    if (doc.contains("incentive_multiplier")) p.incentive_multiplier = number("incentive_multiplier");
    if (doc.contains("initial_ev_share")) p.initial_ev_share = number("initial_ev_share");
    if (doc.contains("population_growth")) p.population_growth = read_series(doc.at("population_growth"), "population_growth");
    if (doc.contains("base_share_growth")) p.base_share_growth = read_series(doc.at("base_share_growth"), "base_share_growth");
    if (doc.contains("population_growth_by_zip")) {
        for (const auto& [zip, series] : doc.at("population_growth_by_zip").items())
            p.population_growth_by_zip[zip] = read_series(series, "population_growth_by_zip." + zip);
    }
    if (doc.contains("zip_population")) {
        for (const auto& [zip, value] : doc.at("zip_population").items()) {
            if (!value.is_number()) throw ParseError("fleet params: zip_population." + zip + ": expected a number");
            p.zip_population[zip] = value.get<double>();
        }
    }
    validate(p);
    return p;
}

double ZipFleet::ev_stock() const { return std::accumulate(cohorts.begin(), cohorts.end(), 0.0); }

std::map<std::string, ZipRegistrations> group_registrations(const std::vector<Registration>& regs) {
    std::map<std::string, ZipRegistrations> out;
    for (const auto& r : regs) {
        auto& z = out[r.zip];
        z.count += r.count;
        if (r.purchase_year) z.by_purchase_year[*r.purchase_year] += r.count;
    }
    // A zip is histogrammed only if every one of its rows carries a year.
    for (auto& [zip, z] : out) {
        double dated = 0.0;
        for (const auto& [year, c] : z.by_purchase_year) dated += c;
        if (dated != z.count) z.by_purchase_year.clear();
    }
    return out;
}

FleetState initialize(const std::map<std::string, ZipRegistrations>& registrations, const FleetParams& params,
                      int base_year) {
    validate(params);
    const auto lifetime = static_cast<std::size_t>(params.vehicle_lifetime);
    FleetState state;
    state.year = base_year;
    for (const auto& [zip, reg] : registrations) {
        if (reg.count < 0.0) throw ModelError("negative EV count for zip " + zip);
        ZipFleet z;
        z.cohorts.assign(lifetime, 0.0);
        if (!reg.by_purchase_year.empty()) {
            for (const auto& [year, count] : reg.by_purchase_year) {
                if (year > base_year)
                    throw ModelError("zip " + zip + ": purchase year " + std::to_string(year) + " after base year");
                const auto age = std::min<std::size_t>(static_cast<std::size_t>(base_year - year), lifetime - 1);
                z.cohorts[age] += count;
            }
        } else {
            const double per_age = std::floor(reg.count / static_cast<double>(lifetime));
            double remainder = reg.count - per_age * static_cast<double>(lifetime);
            for (std::size_t age = 0; age < lifetime; ++age) {
                const double extra = std::min(1.0, remainder);
                z.cohorts[age] = per_age + extra;
                remainder -= extra;
            }
        }

        const auto pop = params.zip_population.find(zip);
        if (pop == params.zip_population.end()) throw ModelError("fleet params: no zip_population for zip " + zip);
        z.total_stock = pop->second * params.ownership_rate;
        if (params.initial_ev_share) {
            z.ev_share = *params.initial_ev_share;
        } else {
            z.ev_share = z.total_stock > 0.0 ? std::clamp(reg.count / z.total_stock, 0.0, 1.0) : 0.0;
        }
        state.zips.emplace(zip, std::move(z));
    }
    return state;
}

namespace {

double series_value(const YearSeries& series, int year, const std::string& name) {
    const auto it = series.find(year);
    if (it == series.end()) throw ModelError("fleet params: missing " + name + " entry for year " + std::to_string(year));
    return it->second;
}

}  // namespace

FleetState step_year(const FleetState& state, const FleetParams& params, std::map<std::string, StepFlows>* flows) {
    const int year = state.year + 1;
    const double share_growth = series_value(params.base_share_growth, year, "base_share_growth");
    const double lifetime = static_cast<double>(params.vehicle_lifetime);

    FleetState next;
    next.year = year;
    for (const auto& [zip, z] : state.zips) {
        const auto override_it = params.population_growth_by_zip.find(zip);
        const double growth = override_it != params.population_growth_by_zip.end() &&
                                      override_it->second.count(year)
                                  ? override_it->second.at(year)
                                  : series_value(params.population_growth, year, "population_growth");

        StepFlows f;
        ZipFleet n;
        n.cohorts.assign(z.cohorts.size(), 0.0);
        f.retired_evs = z.cohorts.back();
        for (std::size_t age = z.cohorts.size() - 1; age > 0; --age) n.cohorts[age] = z.cohorts[age - 1];

        f.retirements = z.total_stock / lifetime;
        n.total_stock = z.total_stock * (1.0 + growth);
        f.new_sales = std::max(0.0, f.retirements + n.total_stock - z.total_stock);
        n.ev_share = std::clamp(z.ev_share * (1.0 + share_growth * params.incentive_multiplier), 0.0, 1.0);
        f.new_evs = f.new_sales * n.ev_share;
        n.cohorts[0] = f.new_evs;

        if (flows) (*flows)[zip] = f;
        next.zips.emplace(zip, std::move(n));
    }
    return next;
}

long long FleetProjection::rounded(int year, const std::string& zip) const {
    return static_cast<long long>(std::floor(ev_count.at(year).at(zip) + 0.5));
}

FleetProjection project(const std::map<std::string, ZipRegistrations>& registrations, const FleetParams& params,
                        int base_year, const std::vector<int>& target_years) {
    for (int y : target_years)
        if (y < base_year) throw ModelError("target year " + std::to_string(y) + " precedes base year");
    FleetProjection out;
    FleetState state = initialize(registrations, params, base_year);
    const int last = target_years.empty() ? base_year : *std::max_element(target_years.begin(), target_years.end());
    auto record = [&](const FleetState& s) {
        if (std::find(target_years.begin(), target_years.end(), s.year) == target_years.end()) return;
        auto& row = out.ev_count[s.year];
        for (const auto& [zip, z] : s.zips)
            row[zip] = s.year == base_year ? registrations.at(zip).count : z.ev_stock();
    };
    record(state);
    while (state.year < last) {
        state = step_year(state, params);
        record(state);
    }
    return out;
}

std::string to_json(const FleetProjection& projection) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [year, zips] : projection.ev_count) {
        auto& row = doc[std::to_string(year)];
        row = nlohmann::ordered_json::object();
        for (const auto& [zip, count] : zips) row[zip] = projection.rounded(year, zip);
    }
    return doc.dump(2);
}

}  // namespace v2g::fleet
