#include "fsa/panel_ols.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <set>

#include "fsa/common.hpp"

namespace fsa {

namespace {

struct CleanPanel {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // reported regressors only
    std::vector<int> year;
    std::vector<int> industry;
};

CleanPanel listwise_drop(const std::vector<PanelRow>& rows, size_t k) {
    std::vector<const PanelRow*> keep;
    for (const auto& r : rows) {
        if (r.regressors.size() != k) throw Error("panel_ols: ragged regressor rows");
        bool ok = std::isfinite(r.dep);
        for (double v : r.regressors) ok = ok && std::isfinite(v);
        if (ok) keep.push_back(&r);
    }
    CleanPanel c;
    c.y.resize(static_cast<Eigen::Index>(keep.size()));
    c.x.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(k));
    for (size_t i = 0; i < keep.size(); ++i) {
        c.y(static_cast<Eigen::Index>(i)) = keep[i]->dep;
        for (size_t j = 0; j < k; ++j) {
            c.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                keep[i]->regressors[j];
        }
        c.year.push_back(keep[i]->year);
        c.industry.push_back(keep[i]->industry);
    }
    return c;
}

std::vector<int> distinct_sorted(const std::vector<int>& v) {
    std::set<int> s(v.begin(), v.end());
    return {s.begin(), s.end()};
}

// Rank of the absorbed mean structure (intercept + fixed effects). For
// two-way effects this is n_years + n_industries - C, where C counts the
// connected components of the year/industry incidence graph; collinear dummy
// levels would otherwise inflate the degrees of freedom.
long absorbed_parameter_count(const CleanPanel& panel, bool fe_year, bool fe_industry) {
    const auto years = distinct_sorted(panel.year);
    const auto industries = distinct_sorted(panel.industry);
    if (!fe_year && !fe_industry) return 1;
    if (fe_year && !fe_industry) return static_cast<long>(years.size());
    if (!fe_year && fe_industry) return static_cast<long>(industries.size());

    std::map<int, int> year_node, ind_node;
    int next = 0;
    for (int y : years) year_node[y] = next++;
    for (int i : industries) ind_node[i] = next++;
    std::vector<int> parent(static_cast<size_t>(next));
    for (int i = 0; i < next; ++i) parent[static_cast<size_t>(i)] = i;
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<size_t>(a)] != a) {
            parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
            a = parent[static_cast<size_t>(a)];
        }
        return a;
    };
    for (size_t i = 0; i < panel.year.size(); ++i) {
        const int a = find(year_node[panel.year[i]]);
        const int b = find(ind_node[panel.industry[i]]);
        if (a != b) parent[static_cast<size_t>(a)] = b;
    }
    std::set<int> roots;
    for (int i = 0; i < next; ++i) roots.insert(find(i));
    return static_cast<long>(years.size()) + static_cast<long>(industries.size()) -
           static_cast<long>(roots.size());
}

// Least squares with rank detection; returns kept column indices.
struct LsSolution {
    Eigen::VectorXd beta_kept;
    std::vector<Eigen::Index> kept;
    Eigen::MatrixXd xtx_inv_kept;
};

LsSolution solve_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    LsSolution sol;
    if (rank == design.cols()) {
        for (Eigen::Index j = 0; j < design.cols(); ++j) sol.kept.push_back(j);
        sol.beta_kept = qr.solve(y);
        sol.xtx_inv_kept =
            (design.transpose() * design)
                .ldlt()
                .solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
        return sol;
    }
    // keep the pivoted independent columns, in original order
    const auto& perm = qr.colsPermutation().indices();
    std::set<Eigen::Index> kept_set;
    for (Eigen::Index i = 0; i < rank; ++i) kept_set.insert(perm(i));
    Eigen::MatrixXd reduced(design.rows(), rank);
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
        if (kept_set.count(j)) {
            reduced.col(at++) = design.col(j);
            sol.kept.push_back(j);
        }
    }
    sol.beta_kept = reduced.householderQr().solve(y);
    sol.xtx_inv_kept = (reduced.transpose() * reduced)
                           .ldlt()
                           .solve(Eigen::MatrixXd::Identity(rank, rank));
    return sol;
}

// CR1 sandwich on the kept design columns.
Eigen::MatrixXd cluster_cov(const Eigen::MatrixXd& design_kept, const Eigen::VectorXd& resid,
                            const std::vector<int>& cluster_ids, long k_for_dof,
                            const Eigen::MatrixXd& xtx_inv, int* n_clusters_out) {
    std::map<int, std::vector<Eigen::Index>> clusters;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(cluster_ids.size()); ++i) {
        clusters[cluster_ids[static_cast<size_t>(i)]].push_back(i);
    }
    const long n = design_kept.rows();
    const long g = static_cast<long>(clusters.size());
    const Eigen::Index k = design_kept.cols();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [id, members] : clusters) {
        Eigen::VectorXd xg_u = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i : members) xg_u += design_kept.row(i).transpose() * resid(i);
        meat += xg_u * xg_u.transpose();
    }
    double scale = 1.0;
    if (g > 1 && n > k_for_dof) {
        scale = (static_cast<double>(g) / (g - 1.0)) *
                ((n - 1.0) / static_cast<double>(n - k_for_dof));
    }
    if (n_clusters_out) *n_clusters_out = static_cast<int>(g);
    return scale * xtx_inv * meat * xtx_inv;
}

}  // namespace

PanelRegressionResult panel_ols(const std::vector<PanelRow>& rows,
                                const std::vector<std::string>& regressor_names,
                                const PanelOptions& options) {
    const size_t k_reg = regressor_names.size();
    CleanPanel panel = listwise_drop(rows, k_reg);
    const Eigen::Index n = panel.y.size();
    if (n == 0) throw Error("panel_ols: no complete rows");

    const auto years = distinct_sorted(panel.year);
    const auto industries = distinct_sorted(panel.industry);

    PanelRegressionResult res;
    res.names = regressor_names;
    res.n_obs = n;

    // Effective parameter count of the mean structure; shared by both paths
    // so their degrees of freedom agree even with collinear dummy levels.
    const long k_absorbed = absorbed_parameter_count(panel, options.fe_year, options.fe_industry);

    Eigen::VectorXd resid;
    Eigen::VectorXd fitted;
    std::vector<double> coef(k_reg, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> se(k_reg, std::numeric_limits<double>::quiet_NaN());
    long k_kept_total = 0;

    if (options.method == FeMethod::DummyExpansion || (!options.fe_year && !options.fe_industry)) {
        Eigen::Index cols = 1 + static_cast<Eigen::Index>(k_reg);
        if (options.fe_year) cols += static_cast<Eigen::Index>(years.size()) - 1;
        if (options.fe_industry) cols += static_cast<Eigen::Index>(industries.size()) - 1;
        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, cols);
        design.col(0).setOnes();
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k_reg); ++j) {
            design.col(1 + j) = panel.x.col(j);
        }
        Eigen::Index at = 1 + static_cast<Eigen::Index>(k_reg);
        if (options.fe_year) {
            std::map<int, Eigen::Index> ycol;
            for (size_t i = 1; i < years.size(); ++i) ycol[years[i]] = at++;
            for (Eigen::Index i = 0; i < n; ++i) {
                auto it = ycol.find(panel.year[static_cast<size_t>(i)]);
                if (it != ycol.end()) design(i, it->second) = 1.0;
            }
        }
        if (options.fe_industry) {
            std::map<int, Eigen::Index> icol;
            for (size_t i = 1; i < industries.size(); ++i) icol[industries[i]] = at++;
            for (Eigen::Index i = 0; i < n; ++i) {
                auto it = icol.find(panel.industry[static_cast<size_t>(i)]);
                if (it != icol.end()) design(i, it->second) = 1.0;
            }
        }

        LsSolution sol = solve_ls(design, panel.y);
        k_kept_total = static_cast<long>(sol.kept.size());
        fitted = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i < sol.kept.size(); ++i) {
            fitted += design.col(sol.kept[i]) * sol.beta_kept(static_cast<Eigen::Index>(i));
        }
        resid = panel.y - fitted;

        Eigen::MatrixXd design_kept(n, static_cast<Eigen::Index>(sol.kept.size()));
        for (size_t i = 0; i < sol.kept.size(); ++i) design_kept.col(static_cast<Eigen::Index>(i)) = design.col(sol.kept[i]);
        std::vector<int> cluster_ids(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            cluster_ids[static_cast<size_t>(i)] = options.cluster_by_industry
                                                      ? panel.industry[static_cast<size_t>(i)]
                                                      : static_cast<int>(i);
        }
        const Eigen::MatrixXd cov = cluster_cov(design_kept, resid, cluster_ids, k_kept_total,
                                                sol.xtx_inv_kept, &res.n_clusters);

        for (size_t j = 0; j < k_reg; ++j) {
            const Eigen::Index col = 1 + static_cast<Eigen::Index>(j);
            auto it = std::find(sol.kept.begin(), sol.kept.end(), col);
            if (it == sol.kept.end()) {
                res.dropped.push_back(regressor_names[j]);
                continue;
            }
            const Eigen::Index pos = it - sol.kept.begin();
            coef[j] = sol.beta_kept(pos);
            se[j] = std::sqrt(std::max(cov(pos, pos), 0.0));
        }
    } else {
        // within transformation: alternating demeaning until convergence
        Eigen::VectorXd yd = panel.y;
        Eigen::MatrixXd xd = panel.x;
        auto demean_by = [&](const std::vector<int>& ids) {
            std::map<int, std::pair<double, long>> stats;
            for (Eigen::Index i = 0; i < n; ++i) {
                auto& s = stats[ids[static_cast<size_t>(i)]];
                s.first += yd(i);
                s.second += 1;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& s = stats[ids[static_cast<size_t>(i)]];
                yd(i) -= s.first / static_cast<double>(s.second);
            }
            for (Eigen::Index j = 0; j < xd.cols(); ++j) {
                std::map<int, std::pair<double, long>> cs;
                for (Eigen::Index i = 0; i < n; ++i) {
                    auto& s = cs[ids[static_cast<size_t>(i)]];
                    s.first += xd(i, j);
                    s.second += 1;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const auto& s = cs[ids[static_cast<size_t>(i)]];
                    xd(i, j) -= s.first / static_cast<double>(s.second);
                }
            }
        };
        // single FE converges in one pass; two-way iterates
        const int sweeps = (options.fe_year && options.fe_industry) ? 100 : 1;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            const Eigen::VectorXd before = yd;
            if (options.fe_year) demean_by(panel.year);
            if (options.fe_industry) demean_by(panel.industry);
            if ((yd - before).cwiseAbs().maxCoeff() < 1e-13) break;
        }

        LsSolution sol = solve_ls(xd, yd);
        k_kept_total = static_cast<long>(sol.kept.size()) + k_absorbed;
        Eigen::VectorXd fitted_w = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i < sol.kept.size(); ++i) {
            fitted_w += xd.col(sol.kept[i]) * sol.beta_kept(static_cast<Eigen::Index>(i));
        }
        resid = yd - fitted_w;     // residuals match the full-dummy fit (FWL)
        fitted = panel.y - resid;  // implied full fit incl. absorbed effects

        Eigen::MatrixXd design_kept(n, static_cast<Eigen::Index>(sol.kept.size()));
        for (size_t i = 0; i < sol.kept.size(); ++i) design_kept.col(static_cast<Eigen::Index>(i)) = xd.col(sol.kept[i]);
        std::vector<int> cluster_ids(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            cluster_ids[static_cast<size_t>(i)] = options.cluster_by_industry
                                                      ? panel.industry[static_cast<size_t>(i)]
                                                      : static_cast<int>(i);
        }
        const Eigen::MatrixXd cov = cluster_cov(design_kept, resid, cluster_ids, k_kept_total,
                                                sol.xtx_inv_kept, &res.n_clusters);
        for (size_t j = 0; j < k_reg; ++j) {
            auto it = std::find(sol.kept.begin(), sol.kept.end(), static_cast<Eigen::Index>(j));
            if (it == sol.kept.end()) {
                res.dropped.push_back(regressor_names[j]);
                continue;
            }
            const Eigen::Index pos = it - sol.kept.begin();
            coef[j] = sol.beta_kept(pos);
            se[j] = std::sqrt(std::max(cov(pos, pos), 0.0));
        }
    }

    const double mean_y = panel.y.mean();
    const double sst = (panel.y.array() - mean_y).square().sum();
    const double ssr = resid.squaredNorm();
    res.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    res.adjusted_r2 =
        n > k_kept_total
            ? 1.0 - (1.0 - res.r2) * (static_cast<double>(n) - 1.0) /
                        (static_cast<double>(n) - static_cast<double>(k_kept_total))
            : res.r2;

    for (size_t j = 0; j < k_reg; ++j) {
        if (std::isnan(coef[j])) continue;
        res.coefficients[regressor_names[j]] = coef[j];
        res.clustered_se[regressor_names[j]] = se[j];
        res.t_stats[regressor_names[j]] = se[j] > 0.0 ? coef[j] / se[j] : 0.0;
    }
    return res;
}

OlsFit ols_with_intercept(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                          int newey_west_lags) {
    const Eigen::Index n = y.size();
    if (x.rows() != n) throw Error("ols: X/y row mismatch");
    Eigen::MatrixXd design(n, x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    const Eigen::Index k = design.cols();
    if (n <= k) throw Error("ols: too few observations");

    const Eigen::MatrixXd xtx_inv =
        (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    OlsFit fit;
    fit.n = n;
    fit.beta = xtx_inv * design.transpose() * y;
    fit.residuals = y - design * fit.beta;

    Eigen::MatrixXd cov;
    if (newey_west_lags < 0) {
        const double sigma2 = fit.residuals.squaredNorm() / static_cast<double>(n - k);
        cov = sigma2 * xtx_inv;
    } else {
        // Newey-West with Bartlett weights
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd xi = design.row(i).transpose() * fit.residuals(i);
            meat += xi * xi.transpose();
        }
        for (int lag = 1; lag <= newey_west_lags; ++lag) {
            const double w = 1.0 - static_cast<double>(lag) / (newey_west_lags + 1.0);
            Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, k);
            for (Eigen::Index i = lag; i < n; ++i) {
                const Eigen::VectorXd a = design.row(i).transpose() * fit.residuals(i);
                const Eigen::VectorXd b =
                    design.row(i - lag).transpose() * fit.residuals(i - lag);
                gamma += a * b.transpose() + b * a.transpose();
            }
            meat += w * gamma;
        }
        cov = xtx_inv * meat * xtx_inv * (static_cast<double>(n) / (n - k));
    }

    fit.se.resize(k);
    fit.t_stats.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        fit.se(i) = std::sqrt(std::max(cov(i, i), 0.0));
        fit.t_stats(i) = fit.se(i) > 0.0 ? fit.beta(i) / fit.se(i) : 0.0;
    }
    const double mean_y = y.mean();
    const double sst = (y.array() - mean_y).square().sum();
    fit.r2 = sst > 0.0 ? 1.0 - fit.residuals.squaredNorm() / sst : 0.0;
    fit.adjusted_r2 = 1.0 - (1.0 - fit.r2) * (static_cast<double>(n) - 1.0) /
                                (static_cast<double>(n) - static_cast<double>(k));
    return fit;
}

}  // namespace fsa
