#include "fsa/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fsa/csv.hpp"
#include "fsa/rng.hpp"

namespace fsa {

using nlohmann::json;

std::vector<RollingWindow> make_windows(const std::set<int>& years_with_data, int from_year,
                                        int to_year, int train_span) {
    std::vector<RollingWindow> out;
    for (int test = from_year; test <= to_year; ++test) {
        if (!years_with_data.count(test)) continue;
        RollingWindow w;
        w.test_year = test;
        bool complete = true;
        for (int y = test - train_span; y < test; ++y) {
            if (!years_with_data.count(y)) {
                complete = false;
                break;
            }
            w.train_years.push_back(y);
        }
        if (complete) out.push_back(std::move(w));
    }
    return out;
}

int predict_random_walk(double eps_t, double eps_t_minus_1) {
    return eps_t > eps_t_minus_1 ? 1 : 0;
}

PredictionSet run_random_walk(const std::vector<FirmYearRecord>& records) {
    PredictionSet set;
    set.method = "random_walk";
    for (const auto& rec : records) {
        const double eps_t = rec.eps_basic(0);
        const double eps_t1 = rec.eps_basic(1);
        if (std::isnan(eps_t) || std::isnan(eps_t1)) continue;
        PredEntry e;
        e.pred = predict_random_walk(eps_t, eps_t1);
        set.entries[rec.key()] = e;
    }
    return set;
}

std::vector<double> consensus_forecast_values(
    const std::vector<AnalystForecastRecord>& forecasts, int horizon_months) {
    // The h-month window: (release + (h-1) months, release + h months].
    // Per analyst, keep the forecast closest to the release date.
    std::map<std::string, const AnalystForecastRecord*> per_analyst;
    for (const auto& f : forecasts) {
        const Date lo = add_months(f.prior_earnings_release_date, horizon_months - 1);
        const Date hi = add_months(f.prior_earnings_release_date, horizon_months);
        const bool in_window =
            (horizon_months == 1 ? f.issue_date >= f.prior_earnings_release_date
                                 : f.issue_date > lo) &&
            f.issue_date <= hi;
        if (!in_window) continue;
        auto [it, inserted] = per_analyst.try_emplace(f.analyst_id, &f);
        if (!inserted) {
            const auto& cur = *it->second;
            if (f.issue_date < cur.issue_date ||
                (f.issue_date == cur.issue_date && f.forecast_eps < cur.forecast_eps)) {
                it->second = &f;
            }
        }
    }
    std::vector<double> values;
    values.reserve(per_analyst.size());
    for (const auto& [id, f] : per_analyst) values.push_back(f->forecast_eps);
    std::sort(values.begin(), values.end());
    return values;
}

std::optional<int> predict_analyst_consensus(const std::vector<AnalystForecastRecord>& forecasts,
                                             double eps_t, int horizon_months) {
    if (std::isnan(eps_t)) return std::nullopt;
    const std::vector<double> values = consensus_forecast_values(forecasts, horizon_months);
    if (values.size() < 3) return std::nullopt;
    const size_t n = values.size();
    const double median =
        n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return median > eps_t ? 1 : 0;
}

PredictionSet run_analyst_consensus(const Panel& panel,
                                    const std::vector<FirmYearRecord>& records,
                                    const std::vector<AnalystForecastRecord>& forecasts,
                                    int horizon_months) {
    // forecasts for (firm, t+1) drive the prediction attached to firm-year t
    std::map<std::pair<std::string, int>, std::vector<AnalystForecastRecord>> grouped;
    for (const auto& f : forecasts) {
        grouped[{f.firm_id, f.fiscal_year_forecasted}].push_back(f);
    }
    PredictionSet set;
    set.method = strf("analyst_%dm", horizon_months);
    for (const auto& rec : records) {
        auto eps_t = panel.eps(rec.firm_id, rec.fiscal_year);
        if (!eps_t) continue;
        auto it = grouped.find({rec.firm_id, rec.fiscal_year + 1});
        if (it == grouped.end()) continue;
        auto pred = predict_analyst_consensus(it->second, *eps_t, horizon_months);
        if (!pred) continue;
        PredEntry e;
        e.pred = *pred;
        set.entries[rec.key()] = e;
    }
    return set;
}

namespace {

struct WindowSlices {
    std::vector<int> train_rows;
    std::vector<int> test_rows;
};

WindowSlices slice_window(const FeatureMatrix& features, const std::map<FirmYear, int>& targets,
                          const RollingWindow& window) {
    WindowSlices s;
    const std::set<int> train_years(window.train_years.begin(), window.train_years.end());
    for (size_t r = 0; r < features.keys.size(); ++r) {
        const int year = features.years[r];
        if (train_years.count(year)) {
            if (targets.count(features.keys[r])) s.train_rows.push_back(static_cast<int>(r));
        } else if (year == window.test_year) {
            s.test_rows.push_back(static_cast<int>(r));
        }
    }
    return s;
}

Eigen::MatrixXd take_matrix(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

/// Standardize selected columns on training stats; untouched columns pass
/// through raw (NaN still maps to 0 to stay finite).
struct MaskedScaler {
    Standardizer scaler;
    std::vector<bool> mask;

    void fit(const Eigen::MatrixXd& train) { scaler.fit(train); }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd z = scaler.transform(x);
        if (mask.empty()) return z;
        Eigen::MatrixXd out = z;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (mask[static_cast<size_t>(c)]) continue;
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                const double v = x(r, c);
                out(r, c) = std::isnan(v) ? 0.0 : v;
            }
        }
        return out;
    }
};

bool single_class(const Eigen::VectorXi& y, int* majority) {
    int ones = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ones += y(i);
    *majority = ones * 2 >= y.size() ? 1 : 0;
    return ones == 0 || ones == y.size();
}

}  // namespace

MethodRun run_rolling_logit(const FeatureMatrix& features, const std::map<FirmYear, int>& targets,
                            const RollingConfig& config) {
    MethodRun run;
    run.predictions.method = "logit";
    std::set<int> years(features.years.begin(), features.years.end());
    for (const auto& window : make_windows(years, config.from_year, config.to_year)) {
        const WindowSlices slices = slice_window(features, targets, window);
        if (slices.train_rows.empty() || slices.test_rows.empty()) {
            run.diagnostics.push_back(
                strf("logit window %d skipped: empty train or test slice", window.test_year));
            continue;
        }
        WindowInfo info;
        info.window = window;
        info.n_train = static_cast<int>(slices.train_rows.size());
        info.n_test = static_cast<int>(slices.test_rows.size());
        for (int r : slices.train_rows) info.train_observation_years.push_back(features.years[r]);

        Eigen::VectorXi y(static_cast<Eigen::Index>(slices.train_rows.size()));
        for (size_t i = 0; i < slices.train_rows.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = targets.at(features.keys[slices.train_rows[i]]);
        }

        MaskedScaler scaler;
        scaler.mask = config.standardize_mask;
        const Eigen::MatrixXd x_train_raw = take_matrix(features.values, slices.train_rows);
        scaler.fit(x_train_raw);
        const Eigen::MatrixXd x_train = scaler.transform(x_train_raw);
        const Eigen::MatrixXd x_test =
            scaler.transform(take_matrix(features.values, slices.test_rows));

        int majority = 0;
        if (single_class(y, &majority)) {
            info.degenerate_single_class = true;
            run.diagnostics.push_back(
                strf("logit window %d: single-class training window, emitting majority class",
                     window.test_year));
            for (size_t i = 0; i < slices.test_rows.size(); ++i) {
                PredEntry e;
                e.pred = majority;
                e.score = majority == 1 ? 0.5 + 1e-6 : 0.5 - 1e-6;
                run.predictions.entries[features.keys[slices.test_rows[i]]] = e;
            }
            run.windows.push_back(std::move(info));
            continue;
        }

        StepwiseModel model;
        try {
            model = fit_stepwise_logistic(x_train, y, config.stepwise_alpha);
        } catch (const Error& e) {
            run.diagnostics.push_back(
                strf("logit window %d skipped: %s", window.test_year, e.what()));
            continue;
        }
        info.selected_predictors = model.selected;
        if (model.model.ridge_used) {
            run.diagnostics.push_back(
                strf("logit window %d: ridge-stabilized refit used", window.test_year));
        }
        for (size_t i = 0; i < slices.test_rows.size(); ++i) {
            const Eigen::VectorXd row = x_test.row(static_cast<Eigen::Index>(i));
            PredEntry e;
            const double p = model.predict_proba(row);
            e.score = p;
            e.pred = p > 0.5 ? 1 : 0;
            run.predictions.entries[features.keys[slices.test_rows[i]]] = e;
        }
        run.windows.push_back(std::move(info));
    }
    return run;
}

MethodRun run_rolling_mlp(const FeatureMatrix& features, const std::map<FirmYear, int>& targets,
                          const RollingConfig& config) {
    MethodRun run;
    run.predictions.method = "mlp";
    std::set<int> years(features.years.begin(), features.years.end());
    for (const auto& window : make_windows(years, config.from_year, config.to_year)) {
        const WindowSlices slices = slice_window(features, targets, window);
        if (slices.train_rows.empty() || slices.test_rows.empty()) {
            run.diagnostics.push_back(
                strf("mlp window %d skipped: empty train or test slice", window.test_year));
            continue;
        }
        WindowInfo info;
        info.window = window;
        info.n_train = static_cast<int>(slices.train_rows.size());
        info.n_test = static_cast<int>(slices.test_rows.size());
        for (int r : slices.train_rows) info.train_observation_years.push_back(features.years[r]);

        Eigen::VectorXi y(static_cast<Eigen::Index>(slices.train_rows.size()));
        for (size_t i = 0; i < slices.train_rows.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = targets.at(features.keys[slices.train_rows[i]]);
        }

        MaskedScaler scaler;
        scaler.mask = config.standardize_mask;
        const Eigen::MatrixXd x_train_raw = take_matrix(features.values, slices.train_rows);
        scaler.fit(x_train_raw);
        const Eigen::MatrixXd x_train = scaler.transform(x_train_raw);
        const Eigen::MatrixXd x_test =
            scaler.transform(take_matrix(features.values, slices.test_rows));

        int majority = 0;
        if (single_class(y, &majority)) {
            info.degenerate_single_class = true;
            run.diagnostics.push_back(
                strf("mlp window %d: single-class training window, emitting majority class",
                     window.test_year));
            for (size_t i = 0; i < slices.test_rows.size(); ++i) {
                PredEntry e;
                e.pred = majority;
                e.score = majority == 1 ? 0.5 + 1e-6 : 0.5 - 1e-6;
                run.predictions.entries[features.keys[slices.test_rows[i]]] = e;
            }
            run.windows.push_back(std::move(info));
            continue;
        }

        MlpConfig base = config.mlp;
        base.input_dim = static_cast<int>(features.values.cols());
        base.seed = derive_seed(config.seed, static_cast<uint64_t>(window.test_year));
        GridSearchResult grid;
        try {
            grid = fit_mlp_grid(x_train, y, base, config.learning_rates, config.dropouts);
        } catch (const Error& e) {
            run.diagnostics.push_back(
                strf("mlp window %d failed: %s", window.test_year, e.what()));
            continue;
        }
        for (const auto& d : grid.diagnostics) {
            run.diagnostics.push_back(strf("mlp window %d: %s", window.test_year, d.c_str()));
        }
        info.learning_rate = grid.learning_rate;
        info.dropout = grid.dropout;
        {
            json dump;
            dump["learning_rate"] = grid.learning_rate;
            dump["dropout"] = grid.dropout;
            dump["validation_loss"] = grid.best.validation_loss;
            dump["epochs"] = grid.best.epochs_run;
            dump["model"] = json::parse(grid.best.model.to_json());
            json mean = json::array(), stdev = json::array();
            for (Eigen::Index c = 0; c < scaler.scaler.mean().size(); ++c) {
                mean.push_back(scaler.scaler.mean()(c));
                stdev.push_back(scaler.scaler.stdev()(c));
            }
            dump["standardization"] = {{"mean", mean}, {"stdev", stdev}};
            info.model_json = dump.dump();
        }

        const Eigen::MatrixXd proba = grid.best.model.predict_proba(x_test);
        for (size_t i = 0; i < slices.test_rows.size(); ++i) {
            PredEntry e;
            const double p1 = proba(static_cast<Eigen::Index>(i), 0);
            const double p2 = proba(static_cast<Eigen::Index>(i), 1);
            e.score = p1;
            e.pred = p1 > p2 ? 1 : 0;
            run.predictions.entries[features.keys[slices.test_rows[i]]] = e;
        }
        run.windows.push_back(std::move(info));
    }
    return run;
}

// ---------------------------------------------------------------------------

void save_predictions(const PredictionSet& p, const std::string& path) {
    CsvTable t({"method", "firm_id", "fiscal_year", "pred", "score", "confidence",
                "mean_logprob", "magnitude", "provider"});
    for (const auto& [key, e] : p.entries) {
        t.append_row({p.method, key.firm_id, std::to_string(key.fiscal_year),
                      std::to_string(e.pred), e.score ? csv_number(*e.score) : "",
                      e.confidence ? csv_number(*e.confidence) : "",
                      e.mean_logprob ? csv_number(*e.mean_logprob) : "",
                      e.magnitude ? to_string(*e.magnitude) : "", e.provider});
    }
    t.write_file(path);
}

PredictionSet load_predictions(const std::string& path) {
    const CsvTable t = CsvTable::read_file(path);
    PredictionSet p;
    for (size_t r = 0; r < t.rows(); ++r) {
        if (r == 0) p.method = t.cell(r, "method");
        FirmYear key{t.cell(r, "firm_id"), t.integer(r, "fiscal_year").value_or(0)};
        PredEntry e;
        e.pred = t.integer(r, "pred").value_or(0);
        if (auto v = t.number(r, "score")) e.score = *v;
        if (auto v = t.number(r, "confidence")) e.confidence = *v;
        if (auto v = t.number(r, "mean_logprob")) e.mean_logprob = *v;
        const std::string mag = t.cell(r, "magnitude");
        if (!mag.empty()) e.magnitude = parse_magnitude(mag);
        e.provider = t.cell(r, "provider");
        p.entries[key] = e;
    }
    return p;
}

}  // namespace fsa
