#include "v2g/runner.hpp"

#include "v2g/allocation.hpp"
#include "v2g/csv.hpp"
#include "v2g/endurance.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/grid.hpp"
#include "v2g/participation.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

namespace v2g::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
    return (fs::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
T get(const json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + key + "' is missing or has the wrong type");
    }
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");

    RunConfig c;
    c.source_text = std::string(json_text);
    auto path = [&](const char* key) { return resolve(base_dir, get<std::string>(doc, key)); };
    auto optional_path = [&](const char* key) -> std::optional<std::string> {
        if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
        return path(key);
    };
    c.case_path = path("case");
    c.scenarios_path = path("scenarios");
    c.registrations_path = path("registrations");
    c.population_path = path("population");
    c.survey_path = path("survey");
    c.zip_centroids_path = optional_path("zip_centroids");
    c.zip_map_path = optional_path("zip_map");
    c.fleet_params_path = path("fleet_params");
    c.target_peak_mw = get<double>(doc, "target_peak_mw");
    c.base_year = get<int>(doc, "base_year");
    c.years = get<std::vector<int>>(doc, "years");
    if (doc.contains("power_per_vehicle_kw")) c.power_per_vehicle_kw = get<double>(doc, "power_per_vehicle_kw");
    if (doc.contains("holdout_fraction")) c.holdout_fraction = get<double>(doc, "holdout_fraction");
    if (doc.contains("seed")) c.seed = get<std::uint64_t>(doc, "seed");
    if (doc.contains("format")) c.format = get<std::string>(doc, "format");
    c.output_path = optional_path("output");
    c.endurance_output_path = optional_path("endurance_output");
    if (doc.contains("endurance_horizon_h")) c.endurance_horizon_h = get<double>(doc, "endurance_horizon_h");
    if (doc.contains("endurance_step_h")) c.endurance_step_h = get<double>(doc, "endurance_step_h");
    if (doc.contains("workers")) c.workers = get<std::size_t>(doc, "workers");

    if (doc.contains("solver")) {
        const auto& s = doc.at("solver");
        if (!s.is_object()) throw ConfigError("config: 'solver' must be an object");
        auto& o = c.solver;
        if (s.contains("pf_tolerance")) o.pf_tolerance = get<double>(s, "pf_tolerance");
        if (s.contains("max_pf_iterations")) o.max_pf_iterations = get<int>(s, "max_pf_iterations");
        if (s.contains("shed_penalty")) o.shed_penalty = get<double>(s, "shed_penalty");
        if (s.contains("enforce_line_limits")) o.enforce_line_limits = get<bool>(s, "enforce_line_limits");
        if (s.contains("enforce_voltage_limits")) o.enforce_voltage_limits = get<bool>(s, "enforce_voltage_limits");
        if (s.contains("max_opf_iterations")) o.max_opf_iterations = get<int>(s, "max_opf_iterations");
        if (s.contains("opf_tolerance_mw")) o.opf_tolerance_mw = get<double>(s, "opf_tolerance_mw");
    }
    return c;
}

RunConfig read_config(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    return parse_config(csv::read_text_file(path), fs::path(path).parent_path().string());
}

void check_config(const RunConfig& c) {
    auto must_exist = [](const std::string& p, const char* what) {
        if (!fs::is_regular_file(p)) throw ConfigError(std::string("config: ") + what + " file not found: " + p);
    };
    must_exist(c.case_path, "case");
    must_exist(c.scenarios_path, "scenarios");
    must_exist(c.registrations_path, "registrations");
    must_exist(c.population_path, "population");
    must_exist(c.survey_path, "survey");
    must_exist(c.fleet_params_path, "fleet_params");
    if (c.zip_map_path)
        must_exist(*c.zip_map_path, "zip_map");
    else if (c.zip_centroids_path)
        must_exist(*c.zip_centroids_path, "zip_centroids");
    else
        throw ConfigError("config: one of 'zip_map' or 'zip_centroids' is required");
    if (!(c.target_peak_mw > 0.0)) throw ConfigError("config: target_peak_mw must be > 0");
    if (c.years.empty()) throw ConfigError("config: years must not be empty");
    if (!std::is_sorted(c.years.begin(), c.years.end()) ||
        std::adjacent_find(c.years.begin(), c.years.end()) != c.years.end())
        throw ConfigError("config: years must be strictly ascending");
    if (c.years.front() < c.base_year) throw ConfigError("config: years must not precede base_year");
    if (!(c.power_per_vehicle_kw > 0.0)) throw ConfigError("config: power_per_vehicle_kw must be > 0");
    if (c.format != "csv" && c.format != "json") throw ConfigError("config: unsupported format '" + c.format + "'");
}

std::string config_hash(const RunConfig& c) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    auto feed = [&](std::string_view s) {
        const std::uint64_t len = s.size();
        EVP_DigestUpdate(ctx, &len, sizeof len);
        EVP_DigestUpdate(ctx, s.data(), s.size());
    };
    feed(c.source_text);
    for (const auto* p : {&c.case_path, &c.scenarios_path, &c.registrations_path, &c.population_path,
                          &c.survey_path, &c.fleet_params_path})
        feed(csv::read_text_file(*p));
    if (c.zip_map_path) feed(csv::read_text_file(*c.zip_map_path));
    if (c.zip_centroids_path) feed(csv::read_text_file(*c.zip_centroids_path));
    feed(std::to_string(c.seed));

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Per fleet year: the V2G allocation, or the error that prevented it.
struct FleetLevel {
    std::string label;
    std::optional<allocation::V2GAllocation> alloc;
    std::string error;
};

std::vector<FleetLevel> build_fleet_levels(const RunConfig& c, const grid::NetworkCase& net) {
    std::vector<FleetLevel> levels;
    for (int y : c.years) levels.push_back({std::to_string(y), std::nullopt, {}});
    try {
        const auto survey = participation::parse_survey_csv(csv::read_text_file(c.survey_path));
        const auto model = participation::fit(std::span<const participation::SurveyResponse>(survey),
                                              c.holdout_fraction, c.seed);
        const auto population = participation::parse_population_csv(csv::read_text_file(c.population_path));
        const auto rates = participation::zip_rates(model, population);

        const auto regs = fleet::parse_registrations_csv(csv::read_text_file(c.registrations_path));
        const auto params = fleet::parse_params(csv::read_text_file(c.fleet_params_path));
        const auto projection = fleet::project(fleet::group_registrations(regs), params, c.base_year, c.years);

        const auto map = c.zip_map_path
                             ? allocation::parse_zip_map(csv::read_text_file(*c.zip_map_path), net)
                             : allocation::nearest_substation_map(
                                   allocation::parse_centroids(csv::read_text_file(*c.zip_centroids_path)), net);

        for (auto& level : levels) {
            try {
                const int year = std::stoi(level.label);
                const auto participants = allocation::participants(projection.ev_count.at(year), rates);
                level.alloc = allocation::allocate(participants, map, c.power_per_vehicle_kw);
            } catch (const std::exception& e) {
                level.error = e.what();
            }
        }
    } catch (const std::exception& e) {
        for (auto& level : levels) level.error = e.what();
    }
    return levels;
}

}  // namespace

Report run(const RunConfig& c) {
    check_config(c);
    Report report;
    report.metadata.config_hash = config_hash(c);
    report.metadata.seed = c.seed;
    report.metadata.tool_version = std::string(kToolVersion);
    report.metadata.generated_at = utc_now();

    const auto base_case = grid::read_case_file(c.case_path);
    const auto scenarios = grid::parse_scenarios(csv::read_text_file(c.scenarios_path));

    std::optional<grid::NetworkCase> scaled;
    std::string scale_error;
    try {
        scaled = grid::scale_loads_to_peak(base_case, c.target_peak_mw);
    } catch (const std::exception& e) {
        scale_error = e.what();
    }
    const auto levels = build_fleet_levels(c, scaled ? *scaled : base_case);

    struct Cell {
        std::size_t scenario;
        std::optional<std::size_t> level;  // nullopt = baseline
    };
    std::vector<Cell> cells;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        cells.push_back({s, std::nullopt});
        for (std::size_t l = 0; l < levels.size(); ++l) cells.push_back({s, l});
    }
    report.rows.resize(cells.size());

    auto evaluate = [&](std::size_t k) {
        const auto& cell = cells[k];
        auto& row = report.rows[k];
        row.scenario = scenarios[cell.scenario].name;
        row.fleet_level = cell.level ? levels[*cell.level].label : std::string(kBaselineLevel);
        try {
            if (!scaled) throw ModelError(scale_error);
            auto net = grid::apply_outage(*scaled, scenarios[cell.scenario]).net;
            if (cell.level) {
                const auto& level = levels[*cell.level];
                if (!level.alloc) throw ModelError(level.error);
                net = grid::add_v2g_generators(net, *level.alloc);
                row.v2g_mw = level.alloc->total_mw();
            }
            const auto result = acopf::solve_opf_with_shed(net, c.solver);
            row.status = result.status;
            row.diagnostic = result.diagnostic;
            if (result.status != acopf::DispatchStatus::failed) row.shed_fraction = result.total_shed_fraction;
        } catch (const std::exception& e) {
            row.status = acopf::DispatchStatus::failed;
            row.diagnostic = e.what();
        }
    };

    std::size_t workers = c.workers ? c.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, cells.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) evaluate(k);
        });
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) evaluate(k);
    for (auto& t : pool) t.join();

    if (c.endurance_output_path) {
        const auto regs = fleet::parse_registrations_csv(csv::read_text_file(c.registrations_path));
        const auto curve = endurance::curve(endurance::composition_from_registrations(regs), c.power_per_vehicle_kw,
                                            c.endurance_horizon_h, c.endurance_step_h);
        std::ofstream(*c.endurance_output_path) << endurance::to_csv(curve);
    }
    return report;
}

namespace {

std::string format_mw(double mw) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", mw);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string emit(const Report& report, std::string_view format) {
    if (format == "csv") {
        std::string out = "scenario,fleet_level,v2g_mw,shed_pct,status\n";
        for (const auto& r : report.rows) {
            const std::string pct =
                r.status == acopf::DispatchStatus::failed ? "" : acopf::format_percent(r.shed_fraction * 100.0);
            out += csv_field(r.scenario) + "," + csv_field(r.fleet_level) + "," + format_mw(r.v2g_mw) + "," + pct +
                   "," + std::string(acopf::to_string(r.status)) + "\n";
        }
        return out;
    }
    if (format == "json") {
        nlohmann::ordered_json doc;
        doc["metadata"] = {{"config_hash", report.metadata.config_hash},
                           {"seed", report.metadata.seed},
                           {"tool_version", report.metadata.tool_version},
                           {"generated_at", report.metadata.generated_at}};
        doc["rows"] = nlohmann::ordered_json::array();
        for (const auto& r : report.rows) {
            doc["rows"].push_back({{"scenario", r.scenario},
                                   {"fleet_level", r.fleet_level},
                                   {"v2g_mw", r.v2g_mw},
                                   {"shed_fraction", r.shed_fraction},
                                   {"shed_pct", r.status == acopf::DispatchStatus::failed
                                                    ? std::string()
                                                    : acopf::format_percent(r.shed_fraction * 100.0)},
                                   {"status", std::string(acopf::to_string(r.status))},
                                   {"diagnostic", r.diagnostic}});
        }
        return doc.dump(2) + "\n";
    }
    throw ConfigError("unsupported report format '" + std::string(format) + "'");
}

Report parse_report_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        Report r;
        const auto& m = doc.at("metadata");
        r.metadata.config_hash = m.at("config_hash").get<std::string>();
        r.metadata.seed = m.at("seed").get<std::uint64_t>();
        r.metadata.tool_version = m.at("tool_version").get<std::string>();
        r.metadata.generated_at = m.at("generated_at").get<std::string>();
        for (const auto& row : doc.at("rows")) {
            ReportRow x;
            x.scenario = row.at("scenario").get<std::string>();
            x.fleet_level = row.at("fleet_level").get<std::string>();
            x.v2g_mw = row.at("v2g_mw").get<double>();
            x.shed_fraction = row.at("shed_fraction").get<double>();
            x.status = acopf::parse_status(row.at("status").get<std::string>());
            x.diagnostic = row.value("diagnostic", std::string());
            r.rows.push_back(std::move(x));
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
}

}  // namespace v2g::runner
