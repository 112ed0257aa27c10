#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsa/predictions.hpp"
#include "fsa/records.hpp"

namespace fsa {

enum class Weighting { Equal, Value };
std::string to_string(Weighting w);

/// Long/short membership for one formation year (portfolios are formed on
/// June 30 of fiscal_year + 1 and held twelve months).
struct PortfolioLegs {
    int fiscal_year = 0;
    std::vector<std::string> long_leg;
    std::vector<std::string> short_leg;
    bool shrunk = false;  // a leg ran out of eligible stocks
};

/// Confidence-sorted rule: long the increase-predicted stocks with magnitude
/// moderate/large, keeping the floor(0.10 * universe) highest mean log-prob
/// names; short symmetrically; legs equalized to the smaller side.
PortfolioLegs form_gpt_portfolio(const PredictionSet& predictions,
                                 const std::vector<std::string>& universe, int fiscal_year);

/// Probability-decile rule: long the top floor(n/10) by score, short the
/// bottom. Ties break by firm_id. nullopt when fewer than 10 stocks.
std::optional<PortfolioLegs> form_decile_portfolio(const PredictionSet& predictions,
                                                   int fiscal_year);

struct AlphaFit {
    std::string model;  // CAPM, 3F, 4F, 5F, 5F+Mom
    double alpha = 0.0;       // percent per month
    double t_stat = 0.0;
    std::map<std::string, double> betas;
    long n_months = 0;
};

struct SeriesStats {
    double mean = 0.0;    // percent per month
    double stdev = 0.0;   // percent per month (sample)
    double sharpe = 0.0;  // mean / stdev
    long n_months = 0;
};

struct BacktestResult {
    std::map<MonthKey, double> long_returns;   // decimal per month
    std::map<MonthKey, double> short_returns;
    std::map<MonthKey, double> hl_returns;     // long - short
    SeriesStats long_stats, short_stats, hl_stats;
    SeriesStats hl_stats_after_costs;          // only when costs enabled
    std::vector<AlphaFit> alphas;              // on the H-L series
    std::vector<std::string> diagnostics;
};

struct BacktestOptions {
    Weighting weighting = Weighting::Equal;
    double transaction_cost_bps = 0.0;  // per leg, charged every month when > 0
    int newey_west_lags = -1;           // -1 = plain OLS t-stats
};

/// Monthly return table lookup built from the returns file.
class ReturnsTable {
public:
    explicit ReturnsTable(const std::vector<MonthlyReturnRow>& rows);

    std::optional<double> ret(const std::string& firm, MonthKey month) const;
    std::optional<double> market_equity(const std::string& firm, MonthKey month) const;

private:
    std::map<std::string, std::map<int, MonthlyReturnRow>> by_firm_;
};

/// Holding-period leg returns for a set of formation years. Equal weighting
/// averages constituents; value weighting uses previous-month market equity,
/// refreshed monthly. A constituent missing a month drops out for the rest of
/// the holding year, with weights renormalized over the survivors.
BacktestResult compute_returns(const std::vector<PortfolioLegs>& legs_by_year,
                               const ReturnsTable& returns, const BacktestOptions& options);

SeriesStats series_stats(const std::map<MonthKey, double>& series);

/// Time-series regressions of the H-L series on CAPM/3F/4F/5F/5F+Mom factor
/// sets; alpha is the intercept in percent per month. Requires at least 24
/// overlapping months.
std::vector<AlphaFit> fit_factor_alphas(const std::map<MonthKey, double>& hl_series,
                                        const std::vector<FactorRow>& factors,
                                        int newey_west_lags = -1);

/// Cumulative log-return series (for the growth-of-a-dollar plot/CSV).
std::map<MonthKey, double> cumulative_log_returns(const std::map<MonthKey, double>& series);

}  // namespace fsa
