#pragma once

#include <map>
#include <optional>
#include <string>

namespace fsa {

/// Published full-scale benchmark values, displayed side by side with the
/// desk-scale results in the report tables. Percent units.
struct ReferenceMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;
};

const std::map<std::string, ReferenceMetrics>& reference_prediction_benchmarks();

struct ReferenceBacktest {
    double hl_ret = 0.0;     // percent per month
    double hl_std = 0.0;
    double hl_sharpe = 0.0;
    std::map<std::string, double> hl_alphas;  // factor model -> alpha %/month
};

/// Keyed by "<method>_<weighting>", e.g. "gpt_ew".
const std::map<std::string, ReferenceBacktest>& reference_backtest_benchmarks();

/// Memory-probe reference rates (percent).
struct ReferenceGuessRates {
    double firm_top1 = 0.07;
    double year = 2.95;
    double random_guess = 3.3;
};

ReferenceGuessRates reference_guess_rates();

}  // namespace fsa
