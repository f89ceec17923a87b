#include "v2g/participation.hpp"

#include "v2g/csv.hpp"
#include "v2g/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace v2g::participation {

namespace {

double require(const std::optional<double>& v, std::string_view name) {
    if (!v) throw ModelError("missing feature: " + std::string(name));
    return *v;
}

Sex parse_sex(const std::string& s, const std::string& where) {
    std::string lower;
    for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "male" || lower == "m" || lower == "0") return Sex::male;
    if (lower == "female" || lower == "f" || lower == "1") return Sex::female;
    throw ParseError(where + ": unrecognized sex '" + s + "'");
}

Demographics read_person(const csv::Table& t, std::size_t row) {
    Demographics p;
    p.age = t.number(row, t.column("age"));
    const auto& sex = t.cell(row, t.column("sex"));
    if (!sex.empty()) p.sex = parse_sex(sex, t.source() + ": row " + std::to_string(row + 1));
    p.income_usd = t.number(row, t.column("income_bracket_midpoint"));
    p.education = t.number(row, t.column("education_level"));
    return p;
}

double predict_standardized(const RegressionModel& m, const FeatureVector& z) {
    double y = m.intercept;
    for (std::size_t k = 0; k < kFeatureCount; ++k) y += m.coefficients[k] * z[k];
    return y;
}

FeatureVector standardize(const FeatureVector& raw, const FeatureVector& mean, const FeatureVector& sd) {
    FeatureVector z{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) z[k] = (raw[k] - mean[k]) / sd[k];
    return z;
}

}  // namespace

FeatureVector raw_features(const Demographics& person) {
    FeatureVector f{};
    f[0] = require(person.age, "age");
    if (!person.sex) throw ModelError("missing feature: sex");
    f[1] = *person.sex == Sex::female ? 1.0 : 0.0;
    f[2] = require(person.income_usd, "income") / 1000.0;
    f[3] = require(person.education, "education");
    return f;
}

FeatureVector encode_features(const RegressionModel& model, const Demographics& person) {
    return standardize(raw_features(person), model.feature_mean, model.feature_sd);
}

double predict_raw(const RegressionModel& model, const Demographics& person) {
    return predict_standardized(model, encode_features(model, person));
}

int category_from_raw(double raw) {
    if (std::isnan(raw)) throw ModelError("prediction is NaN");
    const double clamped = std::clamp(raw, 1.0, 5.0);
    return static_cast<int>(std::floor(clamped + 0.5));
}

int predict_category(const RegressionModel& model, const Demographics& person) {
    return category_from_raw(predict_raw(model, person));
}

Eigen::VectorXd ols_solve(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    const auto n = features.rows();
    Eigen::MatrixXd design(n, features.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(features.cols()) = features;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols()) throw ModelError("collinear features");
    return qr.solve(target);
}

RegressionModel fit(std::span<const Observation> data, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ModelError("holdout fraction must be in (0, 1)");
    if (data.size() < 20) throw ModelError("need at least 20 observations to fit, got " + std::to_string(data.size()));
    const auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(data.size())));
    const std::size_t n_train = data.size() - n_hold;
    if (n_hold < 5 || n_train < 5) throw ModelError("holdout split must leave at least 5 observations per part");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<FeatureVector> raw(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) raw[i] = raw_features(data[i].person);

    RegressionModel model;
    model.n_train = n_train;
    model.n_holdout = n_hold;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n_train; ++r) mean += raw[order[r]][k];
        mean /= static_cast<double>(n_train);
        double ss = 0.0;
        for (std::size_t r = 0; r < n_train; ++r) ss += (raw[order[r]][k] - mean) * (raw[order[r]][k] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n_train - 1));
        if (!(sd > 0.0)) throw ModelError("collinear features");
        model.feature_mean[k] = mean;
        model.feature_sd[k] = sd;
    }

    Eigen::MatrixXd z(static_cast<Eigen::Index>(n_train), static_cast<Eigen::Index>(kFeatureCount));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_train));
    for (std::size_t r = 0; r < n_train; ++r) {
        const auto zr = standardize(raw[order[r]], model.feature_mean, model.feature_sd);
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = zr[k];
        y[static_cast<Eigen::Index>(r)] = data[order[r]].target;
    }

    const double y_mean = y.mean();
    const double sst = (y.array() - y_mean).square().sum();
    const Eigen::VectorXd beta = ols_solve(z, y);
    if (sst == 0.0) {
        // Zero-variance target: flat model, R^2 defined as 0.
        model.intercept = y_mean;
        model.coefficients.fill(0.0);
    } else {
        model.intercept = beta[0];
        for (std::size_t k = 0; k < kFeatureCount; ++k) model.coefficients[k] = beta[static_cast<Eigen::Index>(k + 1)];
    }

    double sse = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) {
        const auto zr = standardize(raw[order[r]], model.feature_mean, model.feature_sd);
        const double e = data[order[r]].target - predict_standardized(model, zr);
        sse += e * e;
    }
    model.train_r_squared = sst > 0.0 ? 1.0 - sse / sst : 0.0;

    double hold_mean = 0.0;
    for (std::size_t r = n_train; r < data.size(); ++r) hold_mean += data[order[r]].target;
    hold_mean /= static_cast<double>(n_hold);
    double h_sse = 0.0, h_sst = 0.0, h_abs = 0.0;
    for (std::size_t r = n_train; r < data.size(); ++r) {
        const auto zr = standardize(raw[order[r]], model.feature_mean, model.feature_sd);
        const double target = data[order[r]].target;
        const double e = target - predict_standardized(model, zr);
        h_sse += e * e;
        h_abs += std::abs(e);
        h_sst += (target - hold_mean) * (target - hold_mean);
    }
    model.r_squared = h_sst > 0.0 ? 1.0 - h_sse / h_sst : 0.0;
    model.mean_absolute_error = h_abs / static_cast<double>(n_hold);
    return model;
}

RegressionModel fit(std::span<const SurveyResponse> data, double holdout_fraction, std::uint64_t seed) {
    std::vector<Observation> obs;
    obs.reserve(data.size());
    for (const auto& r : data) obs.push_back({r.person, static_cast<double>(r.willingness)});
    return fit(std::span<const Observation>(obs), holdout_fraction, seed);
}

double participation_rate(int category) {
    if (category < 1 || category > 5) throw ModelError("category out of range: " + std::to_string(category));
    return kCategoryRate[static_cast<std::size_t>(category - 1)];
}

double rate_from_shares(const std::array<double, 5>& shares) {
    double rate = 0.0;
    for (std::size_t k = 0; k < 5; ++k) rate += shares[k] * kCategoryRate[k];
    return std::clamp(rate, 0.0, 1.0);
}

std::vector<ZipParticipation> zip_rates(const RegressionModel& model, std::span<const Resident> population) {
    std::map<std::string, std::array<std::size_t, 5>> counts;
    for (const auto& [zip, person] : population) {
        const int cat = predict_category(model, person);
        ++counts[zip][static_cast<std::size_t>(cat - 1)];
    }
    std::vector<ZipParticipation> out;
    for (const auto& [zip, c] : counts) {
        const double total = static_cast<double>(std::accumulate(c.begin(), c.end(), std::size_t{0}));
        ZipParticipation z;
        z.zip = zip;
        for (std::size_t k = 0; k < 5; ++k) z.shares[k] = static_cast<double>(c[k]) / total;
        z.participation_rate = rate_from_shares(z.shares);
        out.push_back(std::move(z));
    }
    return out;
}

std::vector<SurveyResponse> parse_survey_csv(std::string_view text) {
    const auto t = csv::Table::parse(text, "survey");
    const auto w = t.column("willingness");
    std::vector<SurveyResponse> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        SurveyResponse s;
        s.person = read_person(t, r);
        const double v = t.required_number(r, w);
        if (v != std::floor(v) || v < 1.0 || v > 5.0)
            throw ParseError("survey: row " + std::to_string(r + 1) + ": willingness must be an integer 1-5");
        s.willingness = static_cast<int>(v);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Resident> parse_population_csv(std::string_view text) {
    const auto t = csv::Table::parse(text, "population");
    const auto z = t.column("zip");
    std::vector<Resident> out;
    out.reserve(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.cell(r, z), read_person(t, r));
    return out;
}

std::string to_json(const std::vector<ZipParticipation>& rates) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& z : rates)
        doc.push_back({{"zip", z.zip}, {"shares", z.shares}, {"participation_rate", z.participation_rate}});
    return doc.dump(2);
}

std::vector<ZipParticipation> rates_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("participation rates: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("participation rates: expected an array");
    std::vector<ZipParticipation> out;
    for (const auto& item : doc) {
        try {
            ZipParticipation z;
            z.zip = item.at("zip").get<std::string>();
            z.shares = item.at("shares").get<std::array<double, 5>>();
            z.participation_rate = item.at("participation_rate").get<double>();
            out.push_back(std::move(z));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("participation rates: ") + e.what());
        }
    }
    return out;
}

std::string model_to_json(const RegressionModel& model) {
    nlohmann::ordered_json doc;
    doc["intercept"] = model.intercept;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        const std::string name(kFeatureNames[k]);
        doc["coefficients"][name] = model.coefficients[k];
        doc["standardization"][name] = {{"mean", model.feature_mean[k]}, {"sd", model.feature_sd[k]}};
    }
    doc["r_squared"] = model.r_squared;
    doc["mean_absolute_error"] = model.mean_absolute_error;
    doc["train_r_squared"] = model.train_r_squared;
    doc["n_train"] = model.n_train;
    doc["n_holdout"] = model.n_holdout;
    return doc.dump(2);
}

}  // namespace v2g::participation
