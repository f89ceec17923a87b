// v2gsim: command-line front end for the V2G grid-emergency toolkit.

#include "v2g/allocation.hpp"
#include "v2g/csv.hpp"
#include "v2g/endurance.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/grid.hpp"
#include "v2g/opf.hpp"
#include "v2g/participation.hpp"
#include "v2g/powerflow.hpp"
#include "v2g/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace v2g;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    bool verbose = false;
};

struct Inputs {
    std::string case_path;
    std::string scenarios_path;
    std::string scenario_name;
    std::string registrations_path;
    std::string population_path;
    std::string survey_path;
    std::string zip_centroids_path;
    std::string zip_map_path;
    std::string fleet_params_path;
    std::optional<double> target_peak_mw;
    std::optional<int> base_year;
    std::vector<int> years;
    std::optional<double> power_kw;
    std::optional<double> horizon_h;
    std::optional<double> step_h;
    bool dc = false;
    std::optional<int> year;
};

// Config file values first, explicit flags on top.
runner::RunConfig effective_config(const Globals& g, const Inputs& in) {
    runner::RunConfig c = g.config_path.empty() ? runner::RunConfig{} : runner::read_config(g.config_path);
    auto set = [](std::string& dst, const std::string& src) {
        if (!src.empty()) dst = src;
    };
    set(c.case_path, in.case_path);
    set(c.scenarios_path, in.scenarios_path);
    set(c.registrations_path, in.registrations_path);
    set(c.population_path, in.population_path);
    set(c.survey_path, in.survey_path);
    set(c.fleet_params_path, in.fleet_params_path);
    if (!in.zip_centroids_path.empty()) c.zip_centroids_path = in.zip_centroids_path;
    if (!in.zip_map_path.empty()) c.zip_map_path = in.zip_map_path;
    if (in.target_peak_mw) c.target_peak_mw = *in.target_peak_mw;
    if (in.base_year) c.base_year = *in.base_year;
    if (!in.years.empty()) c.years = in.years;
    if (in.power_kw) c.power_per_vehicle_kw = *in.power_kw;
    if (in.horizon_h) c.endurance_horizon_h = *in.horizon_h;
    if (in.step_h) c.endurance_step_h = *in.step_h;
    if (g.seed) c.seed = *g.seed;
    if (!g.out.empty()) c.output_path = g.out;
    if (!g.format.empty()) c.format = g.format;
    return c;
}

const std::string& need(const std::string& value, const char* what) {
    if (value.empty()) throw ConfigError(std::string("missing input: ") + what + " (pass the flag or set it in --config)");
    return value;
}

void write_output(const Globals& g, const runner::RunConfig& c, const std::string& text) {
    if (!c.output_path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*c.output_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + *c.output_path);
    out << text;
    if (g.verbose) std::cerr << "wrote " << *c.output_path << "\n";
}

grid::NetworkCase load_case(const runner::RunConfig& c) {
    auto net = grid::read_case_file(need(c.case_path, "case"));
    if (c.target_peak_mw > 0.0) net = grid::scale_loads_to_peak(net, c.target_peak_mw);
    return net;
}

grid::NetworkCase apply_named_scenario(const grid::NetworkCase& net, const runner::RunConfig& c,
                                       const std::string& name, bool verbose) {
    if (name.empty()) return net;
    const auto scenarios = grid::parse_scenarios(csv::read_text_file(need(c.scenarios_path, "scenarios")));
    const auto it = std::find_if(scenarios.begin(), scenarios.end(), [&](const auto& s) { return s.name == name; });
    if (it == scenarios.end()) throw ConfigError("unknown scenario: " + name);
    auto result = grid::apply_outage(net, *it);
    if (result.warning) std::cerr << "warning: " << *result.warning << "\n";
    if (verbose) std::cerr << "scenario " << name << " removes " << result.removed_mw << " MW\n";
    return result.net;
}

int cmd_powerflow(const Globals& g, const Inputs& in) {
    const auto c = effective_config(g, in);
    const auto net = apply_named_scenario(load_case(c), c, in.scenario_name, g.verbose);

    // Default dispatch: every unit at the same fraction of pmax, covering load.
    double capacity = 0.0;
    for (const auto& gen : net.generators)
        if (gen.in_service) capacity += gen.pmax;
    const double scale = capacity > 0.0 ? std::min(1.0, net.total_load_mw() / capacity) : 0.0;
    std::vector<double> p;
    for (const auto& gen : net.generators) p.push_back(gen.in_service ? gen.pmax * scale : 0.0);

    const auto pf = acopf::solve_powerflow(net, acopf::scheduled_injections(net, p), c.solver);
    nlohmann::ordered_json doc;
    doc["converged"] = pf.converged;
    doc["iterations"] = pf.iterations;
    doc["max_mismatch"] = pf.max_mismatch;
    doc["diagnostic"] = pf.diagnostic;
    doc["buses"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pf.bus_ids.size(); ++i) {
        nlohmann::ordered_json b;
        b["id"] = pf.bus_ids[i];
        b["vm"] = pf.vm.empty() ? 0.0 : pf.vm[i];
        b["va_rad"] = pf.va.empty() ? 0.0 : pf.va[i];
        if (!pf.injection.empty()) {
            b["p_mw"] = pf.injection[i].p_mw;
            b["q_mvar"] = pf.injection[i].q_mvar;
        }
        doc["buses"].push_back(b);
    }
    write_output(g, c, doc.dump(2) + "\n");
    if (!pf.converged) throw SolverFailure("power flow did not converge: " + pf.diagnostic);
    return kExitOk;
}

allocation::V2GAllocation allocation_for(const runner::RunConfig& c, const grid::NetworkCase& net, int year,
                                         bool verbose);

int cmd_opf(const Globals& g, const Inputs& in) {
    const auto c = effective_config(g, in);
    auto net = apply_named_scenario(load_case(c), c, in.scenario_name, g.verbose);
    if (in.year) {
        const auto alloc = allocation_for(c, net, *in.year, g.verbose);
        if (g.verbose) std::cerr << "adding " << alloc.total_mw() << " MW of V2G for " << *in.year << "\n";
        net = grid::add_v2g_generators(net, alloc);
    }
    const auto result = in.dc ? acopf::solve_dcopf_with_shed(net, c.solver) : acopf::solve_opf_with_shed(net, c.solver);
    if (g.verbose)
        std::cerr << "status " << acopf::to_string(result.status) << ", " << result.opf_iterations
                  << " outer iterations\n";
    write_output(g, c, acopf::to_json(result) + "\n");
    if (result.status == acopf::DispatchStatus::failed) throw SolverFailure("dispatch failed: " + result.diagnostic);
    return kExitOk;
}

std::vector<participation::ZipParticipation> fit_rates(const runner::RunConfig& c, bool verbose) {
    const auto survey = participation::parse_survey_csv(csv::read_text_file(need(c.survey_path, "survey")));
    const auto model =
        participation::fit(std::span<const participation::SurveyResponse>(survey), c.holdout_fraction, c.seed);
    if (verbose) std::cerr << participation::model_to_json(model) << "\n";
    const auto population =
        participation::parse_population_csv(csv::read_text_file(need(c.population_path, "population")));
    return participation::zip_rates(model, population);
}

int cmd_participation(const Globals& g, const Inputs& in) {
    const auto c = effective_config(g, in);
    write_output(g, c, participation::to_json(fit_rates(c, g.verbose)) + "\n");
    return kExitOk;
}

fleet::FleetProjection run_projection(const runner::RunConfig& c) {
    if (c.years.empty()) throw ConfigError("missing input: years");
    const auto regs = fleet::parse_registrations_csv(csv::read_text_file(need(c.registrations_path, "registrations")));
    const auto params = fleet::parse_params(csv::read_text_file(need(c.fleet_params_path, "fleet_params")));
    return fleet::project(fleet::group_registrations(regs), params, c.base_year, c.years);
}

int cmd_project(const Globals& g, const Inputs& in) {
    const auto c = effective_config(g, in);
    write_output(g, c, fleet::to_json(run_projection(c)) + "\n");
    return kExitOk;
}

allocation::ZipBusMap zip_map(const runner::RunConfig& c, const grid::NetworkCase& net) {
    if (c.zip_map_path) return allocation::parse_zip_map(csv::read_text_file(*c.zip_map_path), net);
    if (c.zip_centroids_path)
        return allocation::nearest_substation_map(
            allocation::parse_centroids(csv::read_text_file(*c.zip_centroids_path)), net);
    throw ConfigError("missing input: zip_map or zip_centroids");
}

allocation::V2GAllocation allocation_for(const runner::RunConfig& c, const grid::NetworkCase& net, int year,
                                         bool verbose) {
    auto with_year = c;
    if (std::find(with_year.years.begin(), with_year.years.end(), year) == with_year.years.end()) {
        with_year.years.push_back(year);
        std::sort(with_year.years.begin(), with_year.years.end());
    }
    const auto projection = run_projection(with_year);
    return allocation::allocate(allocation::participants(projection.ev_count.at(year), fit_rates(c, verbose)),
                                zip_map(c, net), c.power_per_vehicle_kw);
}

int cmd_allocate(const Globals& g, const Inputs& in) {
    auto c = effective_config(g, in);
    const auto net = load_case(c);
    const auto rates = fit_rates(c, g.verbose);
    const auto projection = run_projection(c);
    const auto map = zip_map(c, net);

    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (int year : c.years) {
        const auto alloc =
            allocation::allocate(allocation::participants(projection.ev_count.at(year), rates), map,
                                 c.power_per_vehicle_kw);
        doc[std::to_string(year)] = nlohmann::ordered_json::parse(allocation::to_json(alloc));
    }
    write_output(g, c, doc.dump(2) + "\n");
    return kExitOk;
}

int cmd_endurance(const Globals& g, const Inputs& in) {
    const auto c = effective_config(g, in);
    const auto regs = fleet::parse_registrations_csv(csv::read_text_file(need(c.registrations_path, "registrations")));
    const auto curve = endurance::curve(endurance::composition_from_registrations(regs), c.power_per_vehicle_kw,
                                        c.endurance_horizon_h, c.endurance_step_h);
    write_output(g, c, endurance::to_csv(curve));
    return kExitOk;
}

int cmd_run(const Globals& g, const Inputs& in) {
    if (g.config_path.empty()) throw ConfigError("run requires --config");
    const auto c = effective_config(g, in);
    runner::check_config(c);
    const auto report = runner::run(c);
    if (g.verbose)
        for (const auto& row : report.rows)
            if (!row.diagnostic.empty())
                std::cerr << row.scenario << " / " << row.fleet_level << ": " << row.diagnostic << "\n";
    write_output(g, c, runner::emit(report, c.format));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"V2G grid-emergency simulation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    Inputs in;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--seed", g.seed, "Seed for the regression holdout split");
    app.add_option("--out", g.out, "Output file (default: stdout)");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--verbose", g.verbose, "Progress and diagnostics on stderr");

    auto case_opts = [&](CLI::App* sub) {
        sub->add_option("--case", in.case_path, "Network case JSON");
        sub->add_option("--scenarios", in.scenarios_path, "Outage scenarios JSON");
        sub->add_option("--scenario", in.scenario_name, "Apply the named outage scenario");
        sub->add_option("--target-peak-mw", in.target_peak_mw, "Scale loads to this total");
    };
    auto participation_opts = [&](CLI::App* sub) {
        sub->add_option("--survey", in.survey_path, "Survey CSV");
        sub->add_option("--population", in.population_path, "Synthetic population CSV");
    };
    auto fleet_opts = [&](CLI::App* sub) {
        sub->add_option("--registrations", in.registrations_path, "EV registrations CSV");
        sub->add_option("--fleet-params", in.fleet_params_path, "Fleet parameters JSON");
        sub->add_option("--base-year", in.base_year, "Registration snapshot year");
        sub->add_option("--years", in.years, "Projection years");
    };

    auto* powerflow = app.add_subcommand("powerflow", "Newton-Raphson power flow at a proportional dispatch");
    case_opts(powerflow);
    auto* opf = app.add_subcommand("opf", "Optimal dispatch with load shedding");
    case_opts(opf);
    opf->add_flag("--dc", in.dc, "Use the lossless DC linear program");
    opf->add_option("--year", in.year, "Add the projected V2G fleet of this year (needs fleet inputs)");
    auto* part = app.add_subcommand("participation", "Fit the willingness model and score zip rates");
    participation_opts(part);
    auto* project = app.add_subcommand("project", "Project EV counts per zip");
    fleet_opts(project);
    auto* allocate = app.add_subcommand("allocate", "Map participating vehicles to buses");
    case_opts(allocate);
    participation_opts(allocate);
    fleet_opts(allocate);
    allocate->add_option("--zip-centroids", in.zip_centroids_path, "Zip centroid CSV");
    allocate->add_option("--zip-map", in.zip_map_path, "Explicit zip,bus_id CSV");
    allocate->add_option("--power-kw", in.power_kw, "Discharge power per vehicle");
    auto* endure = app.add_subcommand("endurance", "Fleet discharge-endurance curve");
    endure->add_option("--registrations", in.registrations_path, "EV registrations CSV");
    endure->add_option("--power-kw", in.power_kw, "Discharge power per vehicle");
    endure->add_option("--horizon-h", in.horizon_h, "Curve horizon in hours");
    endure->add_option("--step-h", in.step_h, "Curve grid step in hours");
    auto* run = app.add_subcommand("run", "Full scenario sweep report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*powerflow) return cmd_powerflow(g, in);
        if (*opf) return cmd_opf(g, in);
        if (*part) return cmd_participation(g, in);
        if (*project) return cmd_project(g, in);
        if (*allocate) return cmd_allocate(g, in);
        if (*endure) return cmd_endurance(g, in);
        if (*run) return cmd_run(g, in);
    } catch (const SolverFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
