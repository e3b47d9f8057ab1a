#include "fliptrace/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <numeric>
#include <sstream>

namespace fliptrace {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "condition_rate", "shift_rate",      "truncation_rate",
    "deadloc_rate",   "repeat_add_rate", "overwrite_rate",
};

namespace {

/// Householder QR least squares on an m x n column-major matrix, m >= n.
/// Returns false when the matrix is rank deficient; `small_diag` receives
/// the offending column indices.
bool qr_solve(std::vector<std::vector<double>> a, std::vector<double> b,
              std::vector<double>& x, std::vector<size_t>& small_diag) {
    size_t m = b.size();
    size_t n = a.size();
    std::vector<double> diag(n);
    double max_norm = 0.0;
    for (size_t j = 0; j < n; ++j) {
        double norm = 0;
        for (size_t i = 0; i < m; ++i) norm += a[j][i] * a[j][i];
        max_norm = std::max(max_norm, std::sqrt(norm));
    }
    for (size_t k = 0; k < n; ++k) {
        double norm = 0;
        for (size_t i = k; i < m; ++i) norm += a[k][i] * a[k][i];
        norm = std::sqrt(norm);
        if (a[k][k] > 0) norm = -norm;
        diag[k] = norm;
        if (std::fabs(norm) <= 1e-12 * std::max(1.0, max_norm)) {
            small_diag.push_back(k);
            continue;
        }
        for (size_t i = k; i < m; ++i) a[k][i] /= norm;
        a[k][k] -= 1.0;
        for (size_t j = k + 1; j < n; ++j) {
            double s = 0;
            for (size_t i = k; i < m; ++i) s += a[k][i] * a[j][i];
            s /= a[k][k];
            for (size_t i = k; i < m; ++i) a[j][i] += s * a[k][i];
        }
        double s = 0;
        for (size_t i = k; i < m; ++i) s += a[k][i] * b[i];
        s /= a[k][k];
        for (size_t i = k; i < m; ++i) b[i] += s * a[k][i];
    }
    if (!small_diag.empty()) return false;
    x.assign(n, 0.0);
    for (size_t k = n; k-- > 0;) {
        double s = b[k];
        for (size_t j = k + 1; j < n; ++j) s -= a[j][k] * x[j];
        x[k] = s / diag[k];
    }
    return true;
}

double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    double ss = 0;
    for (double v : xs) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(xs.size() - 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

std::vector<BenchmarkRow> load_rows_csv(std::istream& in) {
    std::vector<BenchmarkRow> rows;
    std::string line;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (!header_done) {
            header_done = true;
            if (!cells.empty() && cells[0] == "name") continue;  // header row
        }
        if (cells.size() < 1 + kFeatureCount + 1) {
            throw std::runtime_error("bad dataset row: '" + line + "'");
        }
        BenchmarkRow row;
        row.name = cells[0];
        for (size_t k = 0; k < kFeatureCount; ++k) {
            row.rates[k] = std::stod(cells[1 + k]);
        }
        row.measured_sr = std::stod(cells[1 + kFeatureCount]);
        if (cells.size() > 2 + kFeatureCount && !cells[2 + kFeatureCount].empty()) {
            row.reference_predicted_sr = std::stod(cells[2 + kFeatureCount]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

RegressionModel fit(const std::vector<BenchmarkRow>& rows, double ridge_lambda) {
    constexpr size_t n_cols = kFeatureCount + 1;
    if (rows.size() < n_cols) {
        throw std::invalid_argument("need at least " + std::to_string(n_cols) +
                                    " rows for a determined fit");
    }
    size_t m = rows.size() + (ridge_lambda > 0 ? kFeatureCount : 0);
    std::vector<std::vector<double>> a(n_cols, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t k = 0; k < kFeatureCount; ++k) a[k][i] = rows[i].rates[k];
        a[kFeatureCount][i] = 1.0;
        b[i] = rows[i].measured_sr;
    }
    if (ridge_lambda > 0) {
        double s = std::sqrt(ridge_lambda);
        for (size_t k = 0; k < kFeatureCount; ++k) a[k][rows.size() + k] = s;
    }
    std::vector<double> x;
    std::vector<size_t> bad;
    if (!qr_solve(std::move(a), std::move(b), x, bad)) {
        std::vector<std::string> names;
        std::string msg = "rank-deficient design matrix; collinear columns:";
        for (size_t k : bad) {
            const char* n = k < kFeatureCount ? kFeatureNames[k] : "intercept";
            names.push_back(n);
            msg += std::string(" ") + n;
        }
        throw RankDeficientError(msg, names);
    }
    RegressionModel model;
    for (size_t k = 0; k < kFeatureCount; ++k) model.beta[k] = x[k];
    model.intercept = x[kFeatureCount];
    model.ridge_lambda = ridge_lambda;
    for (const auto& r : rows) model.training_set.push_back(r.name);
    return model;
}

Prediction predict(const RegressionModel& model,
                   const std::array<double, kFeatureCount>& rates) {
    Prediction p;
    p.raw = model.intercept;
    for (size_t k = 0; k < kFeatureCount; ++k) p.raw += model.beta[k] * rates[k];
    p.clamped = std::min(1.0, std::max(0.0, p.raw));
    return p;
}

double r_squared(const RegressionModel& model, const std::vector<BenchmarkRow>& rows) {
    double mean = 0;
    for (const auto& r : rows) mean += r.measured_sr;
    mean /= double(rows.size());
    double ss_res = 0, ss_tot = 0;
    for (const auto& r : rows) {
        double pred = predict(model, r.rates).raw;
        ss_res += (r.measured_sr - pred) * (r.measured_sr - pred);
        ss_tot += (r.measured_sr - mean) * (r.measured_sr - mean);
    }
    return ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

std::array<double, kFeatureCount> standardized_coefficients(
    const RegressionModel& model, const std::vector<BenchmarkRow>& rows,
    std::vector<std::string>* warnings) {
    std::array<double, kFeatureCount> out{};
    std::vector<double> ys;
    for (const auto& r : rows) ys.push_back(r.measured_sr);
    double sy = stddev(ys);
    for (size_t k = 0; k < kFeatureCount; ++k) {
        std::vector<double> xs;
        for (const auto& r : rows) xs.push_back(r.rates[k]);
        double sx = stddev(xs);
        if (sx == 0.0 || sy == 0.0) {
            out[k] = 0.0;
            if (warnings) {
                warnings->push_back(std::string(kFeatureNames[k]) +
                                    ": zero variance, standardized coefficient set to 0");
            }
        } else {
            out[k] = model.beta[k] * sx / sy;
        }
    }
    return out;
}

EvalReport loo_evaluate(const std::vector<BenchmarkRow>& rows, double ridge_lambda) {
    if (rows.size() < kFeatureCount + 2) {
        throw std::invalid_argument("leave-one-out needs at least " +
                                    std::to_string(kFeatureCount + 2) + " rows");
    }
    EvalReport report;
    report.r_squared_in_sample = r_squared(fit(rows, ridge_lambda), rows);

    std::array<double, kFeatureCount> coeff_sum{};
    for (size_t hold = 0; hold < rows.size(); ++hold) {
        std::vector<BenchmarkRow> training;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (i != hold) training.push_back(rows[i]);
        }
        RegressionModel model = fit(training, ridge_lambda);
        Prediction p = predict(model, rows[hold].rates);
        RowEval ev;
        ev.name = rows[hold].name;
        ev.measured = rows[hold].measured_sr;
        ev.predicted_raw = p.raw;
        ev.predicted = p.clamped;
        ev.relative_error = rows[hold].measured_sr == 0
                                ? std::numeric_limits<double>::infinity()
                                : std::fabs(rows[hold].measured_sr - p.clamped) /
                                      rows[hold].measured_sr;
        report.per_row.push_back(std::move(ev));
        auto sc = standardized_coefficients(model, training, &report.warnings);
        for (size_t k = 0; k < kFeatureCount; ++k) coeff_sum[k] += sc[k];
    }
    for (size_t k = 0; k < kFeatureCount; ++k) {
        report.std_coeffs[k] = coeff_sum[k] / double(rows.size());
    }
    for (const auto& held : report.per_row) {
        double sum = 0;
        for (const auto& other : report.per_row) {
            if (other.name != held.name) sum += other.relative_error;
        }
        report.mean_error_excluding[held.name] = sum / double(report.per_row.size() - 1);
    }
    return report;
}

std::array<size_t, kFeatureCount> importance_order(
    const std::array<double, kFeatureCount>& std_coeffs) {
    std::array<size_t, kFeatureCount> order;
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return std::fabs(std_coeffs[a]) > std::fabs(std_coeffs[b]);
    });
    return order;
}

} // namespace fliptrace
