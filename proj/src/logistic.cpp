#include "fsa/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "fsa/common.hpp"

namespace fsa {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_proba(double p) { return std::clamp(p, 1e-15, 1.0 - 1e-15); }

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

struct IrlsResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd information;  // X' W X (+ ridge)
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
};

IrlsResult irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                const LogisticOptions& opts, double lambda) {
    const Eigen::Index n = design.rows();
    const Eigen::Index k = design.cols();
    IrlsResult res;
    res.beta = Eigen::VectorXd::Zero(k);

    Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(k, k);
    if (lambda > 0.0) {
        penalty = lambda * Eigen::MatrixXd::Identity(k, k);
        penalty(0, 0) = 0.0;  // intercept unpenalized
    }

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const Eigen::VectorXd eta = design * res.beta;
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = sigmoid(eta(i));
            w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
        }
        const Eigen::MatrixXd xtwx =
            design.transpose() * w.asDiagonal() * design + penalty;
        const Eigen::VectorXd grad =
            design.transpose() * (y - mu) - penalty * res.beta;
        Eigen::LDLT<Eigen::MatrixXd> solver(xtwx);
        if (solver.info() != Eigen::Success) {
            res.converged = false;
            return res;
        }
        const Eigen::VectorXd delta = solver.solve(grad);
        res.beta += delta;
        res.iterations = iter + 1;
        if (!res.beta.allFinite() || res.beta.cwiseAbs().maxCoeff() > 1e8) {
            res.converged = false;
            return res;
        }
        if (delta.cwiseAbs().maxCoeff() < opts.tolerance) {
            res.converged = true;
            break;
        }
    }

    // final information matrix and log-likelihood at the optimum
    const Eigen::VectorXd eta = design * res.beta;
    Eigen::VectorXd w(n);
    res.log_likelihood = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = clamp_proba(sigmoid(eta(i)));
        w(i) = std::max(p * (1.0 - p), 1e-10);
        res.log_likelihood += y(i) > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    res.information = design.transpose() * w.asDiagonal() * design + penalty;
    return res;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double LogisticModel::predict_proba(const Eigen::VectorXd& x) const {
    if (x.size() + 1 != beta.size()) throw Error("logistic predict: width mismatch");
    double eta = beta(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) eta += beta(i + 1) * x(i);
    return clamp_proba(sigmoid(eta));
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                           const LogisticOptions& options) {
    if (x.rows() != y.size()) throw Error("fit_logistic: X/y row mismatch");
    if (x.rows() == 0) throw Error("fit_logistic: empty training set");
    const Eigen::MatrixXd design = with_intercept(x);
    const Eigen::VectorXd yd = y.cast<double>();

    IrlsResult res = irls(design, yd, options, 0.0);
    bool ridge_used = false;
    if (!res.converged) {
        res = irls(design, yd, options, options.ridge_lambda);
        ridge_used = true;
        if (!res.converged) {
            throw Error("logistic regression failed to converge even with ridge fallback");
        }
    }

    LogisticModel model;
    model.beta = res.beta;
    model.converged = res.converged;
    model.ridge_used = ridge_used;
    model.iterations = res.iterations;
    model.log_likelihood = res.log_likelihood;

    Eigen::LDLT<Eigen::MatrixXd> solver(res.information);
    const Eigen::MatrixXd cov =
        solver.solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
    model.se.resize(design.cols());
    model.p_values.resize(design.cols());
    for (Eigen::Index i = 0; i < design.cols(); ++i) {
        model.se(i) = std::sqrt(std::max(cov(i, i), 0.0));
        const double z = model.se(i) > 0.0 ? model.beta(i) / model.se(i) : 0.0;
        model.p_values(i) = 2.0 * (1.0 - normal_cdf(std::abs(z)));
    }
    return model;
}

double StepwiseModel::predict_proba(const Eigen::VectorXd& full_x) const {
    Eigen::VectorXd sub(static_cast<Eigen::Index>(selected.size()));
    for (size_t i = 0; i < selected.size(); ++i) sub(static_cast<Eigen::Index>(i)) = full_x(selected[i]);
    return model.predict_proba(sub);
}

int StepwiseModel::predict(const Eigen::VectorXd& full_x) const {
    return predict_proba(full_x) > 0.5 ? 1 : 0;
}

StepwiseModel fit_stepwise_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXi& y,
                                    double alpha, const LogisticOptions& options) {
    StepwiseModel out;
    out.step1 = fit_logistic(x, y, options);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (out.step1.p_values(j + 1) < alpha) out.selected.push_back(static_cast<int>(j));
    }
    if (out.selected.empty()) {
        // Nothing significant: intercept-only refit (base-rate model).
        Eigen::MatrixXd empty(x.rows(), 0);
        out.model = fit_logistic(empty, y, options);
        return out;
    }
    Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(out.selected.size()));
    for (size_t i = 0; i < out.selected.size(); ++i) {
        sub.col(static_cast<Eigen::Index>(i)) = x.col(out.selected[i]);
    }
    out.model = fit_logistic(sub, y, options);
    return out;
}

}  // namespace fsa
