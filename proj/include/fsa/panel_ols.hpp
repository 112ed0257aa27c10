#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fsa {

struct PanelRow {
    double dep = 0.0;
    std::vector<double> regressors;
    int year = 0;
    int industry = 0;
};

enum class FeMethod { DummyExpansion, Within };

struct PanelOptions {
    bool fe_year = false;
    bool fe_industry = false;
    bool cluster_by_industry = false;  // otherwise heteroskedasticity-robust (HC1)
    FeMethod method = FeMethod::DummyExpansion;
};

struct PanelRegressionResult {
    std::vector<std::string> names;  // reported regressors, in input order
    std::map<std::string, double> coefficients;
    std::map<std::string, double> clustered_se;
    std::map<std::string, double> t_stats;
    double adjusted_r2 = 0.0;
    double r2 = 0.0;
    long n_obs = 0;
    int n_clusters = 0;
    std::vector<std::string> dropped;  // collinear columns removed
};

/// OLS with optional absorbed year/industry effects and CR1 cluster-robust
/// standard errors (G/(G-1) * (N-1)/(N-K) scaling). Rows with any NaN are
/// dropped listwise; collinear columns are dropped with a diagnostic. The
/// dummy-expansion and within-transformation paths agree on estimates.
PanelRegressionResult panel_ols(const std::vector<PanelRow>& rows,
                                const std::vector<std::string>& regressor_names,
                                const PanelOptions& options);

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;        // plain OLS standard errors
    Eigen::VectorXd t_stats;
    Eigen::VectorXd residuals;
    double r2 = 0.0;
    double adjusted_r2 = 0.0;
    long n = 0;
};

/// Plain time-series OLS of y on [1, X]. Optional Newey-West (HAC) standard
/// errors with the given lag; lag < 0 keeps plain OLS errors.
OlsFit ols_with_intercept(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                          int newey_west_lags = -1);

}  // namespace fsa
