#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fliptrace {

constexpr size_t kFeatureCount = 6;

/// CSV column order: condition, shift, truncation, dead location, repeat
/// addition, overwrite.
extern const std::array<const char*, kFeatureCount> kFeatureNames;

struct BenchmarkRow {
    std::string name;
    std::array<double, kFeatureCount> rates{};
    double measured_sr = 0.0;
    std::optional<double> reference_predicted_sr;  // from the bundled dataset
};

/// Loads rows from a CSV with header
/// name,condition_rate,...,overwrite_rate,measured_sr[,predicted_sr].
std::vector<BenchmarkRow> load_rows_csv(std::istream& in);

struct RankDeficientError : std::runtime_error {
    RankDeficientError(std::string message, std::vector<std::string> columns)
        : std::runtime_error(std::move(message)), columns(std::move(columns)) {}
    std::vector<std::string> columns;
};

struct RegressionModel {
    std::array<double, kFeatureCount> beta{};
    double intercept = 0.0;
    double ridge_lambda = 0.0;
    std::vector<std::string> training_set;
};

/// Least-squares fit of success rate against the six pattern rates, via
/// Householder QR. `ridge_lambda > 0` adds a ridge penalty on the feature
/// coefficients (not the intercept). Deterministic; throws
/// RankDeficientError naming the collinear columns.
RegressionModel fit(const std::vector<BenchmarkRow>& rows, double ridge_lambda = 0.0);

struct Prediction {
    double raw = 0.0;
    double clamped = 0.0;  // reported value, clamped to [0, 1]
};

Prediction predict(const RegressionModel& model, const std::array<double, kFeatureCount>& rates);

/// In-sample coefficient of determination.
double r_squared(const RegressionModel& model, const std::vector<BenchmarkRow>& rows);

/// beta_i scaled by stddev(feature_i) / stddev(measured_sr) over `rows`.
/// Zero-variance columns yield coefficient 0 and are reported in `warnings`.
std::array<double, kFeatureCount> standardized_coefficients(
    const RegressionModel& model, const std::vector<BenchmarkRow>& rows,
    std::vector<std::string>* warnings = nullptr);

struct RowEval {
    std::string name;
    double measured = 0.0;
    double predicted_raw = 0.0;
    double predicted = 0.0;       // clamped
    double relative_error = 0.0;  // |measured - predicted| / measured
};

struct EvalReport {
    double r_squared_in_sample = 0.0;
    std::vector<RowEval> per_row;  // leave-one-out predictions
    /// For each name: the mean relative error over the other rows' LOO
    /// predictions.
    std::map<std::string, double> mean_error_excluding;
    /// Standardized coefficients averaged over the leave-one-out fits, each
    /// scaled by its own training set's stddevs.
    std::array<double, kFeatureCount> std_coeffs{};
    std::vector<std::string> warnings;
};

/// Leave-one-out evaluation: fit on every size-(n-1) subset and predict the
/// held-out row.
EvalReport loo_evaluate(const std::vector<BenchmarkRow>& rows, double ridge_lambda = 0.0);

/// Feature importance order (descending |standardized coefficient|).
std::array<size_t, kFeatureCount> importance_order(
    const std::array<double, kFeatureCount>& std_coeffs);

} // namespace fliptrace
