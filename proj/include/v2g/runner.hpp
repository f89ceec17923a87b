#pragma once

#include "v2g/opf.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2g::runner {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kBaselineLevel = "No V2G";

struct RunConfig {
    std::string case_path;
    std::string scenarios_path;
    std::string registrations_path;
    std::string population_path;
    std::string survey_path;
    std::optional<std::string> zip_centroids_path;
    std::optional<std::string> zip_map_path;  // overrides centroids when present
    std::string fleet_params_path;
    double target_peak_mw = 0.0;
    int base_year = 2025;
    std::vector<int> years;
    double power_per_vehicle_kw = 7.0;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
    acopf::SolverOptions solver;
    std::optional<std::string> output_path;
    std::string format = "csv";
    std::optional<std::string> endurance_output_path;
    double endurance_horizon_h = 24.0;
    double endurance_step_h = 0.25;
    std::size_t workers = 0;  // 0 = hardware concurrency

    // Raw config text, hashed into the report metadata.
    std::string source_text;
};

/// Parses a config document; relative paths resolve against base_dir.
/// Throws ConfigError on any problem, naming the offending field or path.
RunConfig parse_config(std::string_view json_text, const std::string& base_dir);
RunConfig read_config(const std::string& path);

/// Checks that every referenced input exists and years are ascending.
void check_config(const RunConfig& config);

struct ReportRow {
    std::string scenario;
    std::string fleet_level;  // kBaselineLevel or a year
    double v2g_mw = 0.0;
    double shed_fraction = 0.0;
    acopf::DispatchStatus status = acopf::DispatchStatus::failed;
    std::string diagnostic;

    bool operator==(const ReportRow&) const = default;
};

struct ReportMetadata {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string generated_at;

    bool operator==(const ReportMetadata&) const = default;
};

struct Report {
    std::vector<ReportRow> rows;
    ReportMetadata metadata;

    bool operator==(const Report&) const = default;
};

/// The full sweep: every scenario against the no-V2G baseline and each fleet
/// year. A failing cell is recorded with status failed and never stops the
/// others. Rows are ordered scenario-major, baseline first, then years
/// ascending, independent of execution order.
Report run(const RunConfig& config);

/// SHA-256 over the config text, every referenced input file, and the seed.
std::string config_hash(const RunConfig& config);

/// "csv" (scenario,fleet_level,v2g_mw,shed_pct,status) or "json".
std::string emit(const Report& report, std::string_view format);
Report parse_report_json(std::string_view text);

}  // namespace v2g::runner
