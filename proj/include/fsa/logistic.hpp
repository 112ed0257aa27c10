#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fsa {

/// Fitted logistic regression. Column 0 of the design is the intercept;
/// `beta`, `se`, `p_values` are aligned with [intercept, predictors...].
struct LogisticModel {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd p_values;
    bool converged = false;
    bool ridge_used = false;
    int iterations = 0;
    double log_likelihood = 0.0;

    /// P(y = 1 | x) for a predictor row (without intercept).
    double predict_proba(const Eigen::VectorXd& x) const;
};

struct LogisticOptions {
    int max_iterations = 100;
    double tolerance = 1e-10;
    double ridge_lambda = 1e-4;  // fallback penalty on non-intercept terms
};

/// Iteratively reweighted least squares on X (rows without intercept column;
/// one is prepended internally), y in {0,1}. Falls back to a ridge-stabilized
/// refit when plain IRLS diverges or separates; throws Error when that fails
/// too.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                           const LogisticOptions& options = {});

/// Two-step procedure: fit all predictors, keep those with Wald p < alpha,
/// refit on the survivors. The final model's coefficient vector is indexed by
/// `selected` (positions into the original predictor set).
struct StepwiseModel {
    std::vector<int> selected;     // predictor indices kept after step 1
    LogisticModel step1;
    LogisticModel model;           // refit on selected predictors

    double predict_proba(const Eigen::VectorXd& full_x) const;
    /// Classification at the 0.5 threshold; exactly 0.5 maps to 0.
    int predict(const Eigen::VectorXd& full_x) const;
};

StepwiseModel fit_stepwise_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                    double alpha = 0.05, const LogisticOptions& options = {});

/// Standard normal CDF (used for Wald p-values).
double normal_cdf(double z);

}  // namespace fsa
