#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsa/features.hpp"
#include "fsa/fundamentals.hpp"
#include "fsa/logistic.hpp"
#include "fsa/mlp.hpp"
#include "fsa/predictions.hpp"

namespace fsa {

/// Five-year training span ending just before the test year. Windows with
/// fewer than `train_span` populated years are skipped entirely.
struct RollingWindow {
    std::vector<int> train_years;
    int test_year = 0;
};

/// Test years in [from_year, to_year] whose full five-year history exists in
/// `years_with_data`.
std::vector<RollingWindow> make_windows(const std::set<int>& years_with_data, int from_year,
                                        int to_year, int train_span = 5);

/// 1 iff EPS rose from t-1 to t (ties are "not increase").
int predict_random_walk(double eps_t, double eps_t_minus_1);

/// Random-walk predictions over every filtered record with both EPS values.
PredictionSet run_random_walk(const std::vector<FirmYearRecord>& records);

/// Median-consensus direction from the forecasts of one firm-year, using the
/// h-month window after the earnings release; absent when fewer than three
/// distinct analysts forecast in the window.
std::optional<int> predict_analyst_consensus(const std::vector<AnalystForecastRecord>& forecasts,
                                             double eps_t, int horizon_months);

/// Per-analyst forecast values inside the h-month window (the one closest to
/// the release per analyst), sorted ascending. Feeds consensus and dispersion.
std::vector<double> consensus_forecast_values(
    const std::vector<AnalystForecastRecord>& forecasts, int horizon_months);

PredictionSet run_analyst_consensus(const Panel& panel,
                                    const std::vector<FirmYearRecord>& records,
                                    const std::vector<AnalystForecastRecord>& forecasts,
                                    int horizon_months);

struct WindowInfo {
    RollingWindow window;
    std::vector<int> train_observation_years;  // fiscal year of every training row
    int n_train = 0;
    int n_test = 0;
    double learning_rate = 0.0;  // MLP only
    double dropout = 0.0;        // MLP only
    std::vector<int> selected_predictors;  // stepwise only
    bool degenerate_single_class = false;
    std::string model_json;  // weights + scaler dump (MLP), empty otherwise
};

struct MethodRun {
    PredictionSet predictions;
    std::vector<WindowInfo> windows;
    std::vector<std::string> diagnostics;
};

struct RollingConfig {
    int from_year = 0;
    int to_year = 0;
    uint64_t seed = 0;
    double stepwise_alpha = 0.05;
    MlpConfig mlp;  // input_dim filled per window
    std::vector<double> learning_rates = {1e-5, 1e-3, 1e-1};
    std::vector<double> dropouts = {0.0, 0.2, 0.4};
    /// Columns to standardize on training statistics; empty = all columns.
    std::vector<bool> standardize_mask;
};

/// Rolling stepwise-logistic predictions. Inputs should already be imputed;
/// rows missing a target are used for prediction only.
MethodRun run_rolling_logit(const FeatureMatrix& features, const std::map<FirmYear, int>& targets,
                            const RollingConfig& config);

/// Rolling MLP (grid-searched) predictions; same window discipline.
MethodRun run_rolling_mlp(const FeatureMatrix& features, const std::map<FirmYear, int>& targets,
                          const RollingConfig& config);

}  // namespace fsa
