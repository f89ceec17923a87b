#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace v2g::participation {

enum class Sex { male, female };

/// One person's demographic record. Fields are optional so that a missing
/// value can be reported by name instead of silently defaulting.
struct Demographics {
    std::optional<double> age;         // years
    std::optional<Sex> sex;
    std::optional<double> income_usd;  // income bracket midpoint, $/yr
    std::optional<double> education;   // ordinal 1-5
};

struct SurveyResponse {
    Demographics person;
    int willingness = 3;  // Likert 1-5
};

/// Regression sample with a real-valued target; survey responses convert to
/// this with target = willingness.
struct Observation {
    Demographics person;
    double target = 0.0;
};

inline constexpr std::size_t kFeatureCount = 4;
using FeatureVector = std::array<double, kFeatureCount>;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{"age", "sex", "income", "education"};

/// Numeric encoding before standardization: age in years, sex male=0 /
/// female=1, income in $1000s, education ordinal.
FeatureVector raw_features(const Demographics& person);

struct RegressionModel {
    double intercept = 0.0;
    FeatureVector coefficients{};
    FeatureVector feature_mean{};
    FeatureVector feature_sd{};
    double r_squared = 0.0;            // holdout split
    double mean_absolute_error = 0.0;  // holdout split
    double train_r_squared = 0.0;
    std::size_t n_train = 0;
    std::size_t n_holdout = 0;
};

/// Raw features standardized by the model's stored mean and sd.
FeatureVector encode_features(const RegressionModel& model, const Demographics& person);

double predict_raw(const RegressionModel& model, const Demographics& person);

/// Clamp to [1,5] then round half-up.
int category_from_raw(double raw);

int predict_category(const RegressionModel& model, const Demographics& person);

/// Least squares with intercept column prepended. Throws ModelError
/// "collinear features" when the design matrix is rank-deficient.
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& features, const Eigen::VectorXd& target);

/// Fits OLS on standardized features over a seeded holdout split.
RegressionModel fit(std::span<const Observation> data, double holdout_fraction = 0.2, std::uint64_t seed = 0);
RegressionModel fit(std::span<const SurveyResponse> data, double holdout_fraction = 0.2, std::uint64_t seed = 0);

/// Participation rate per Likert category (index 0 = category 1).
inline constexpr std::array<double, 5> kCategoryRate{0.0, 0.25, 0.5, 0.75, 1.0};

double participation_rate(int category);

struct ZipParticipation {
    std::string zip;
    std::array<double, 5> shares{};
    double participation_rate = 0.0;

    bool operator==(const ZipParticipation&) const = default;
};

/// Rate implied by category shares.
double rate_from_shares(const std::array<double, 5>& shares);

using Resident = std::pair<std::string, Demographics>;

/// Per-zip category shares and rates, sorted by zip.
std::vector<ZipParticipation> zip_rates(const RegressionModel& model, std::span<const Resident> population);

std::vector<SurveyResponse> parse_survey_csv(std::string_view text);
std::vector<Resident> parse_population_csv(std::string_view text);

std::string to_json(const std::vector<ZipParticipation>& rates);
std::vector<ZipParticipation> rates_from_json(std::string_view text);
std::string model_to_json(const RegressionModel& model);

}  // namespace v2g::participation
