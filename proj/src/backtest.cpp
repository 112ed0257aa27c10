#include "fsa/backtest.hpp"

#include <algorithm>
#include <cmath>

#include "fsa/panel_ols.hpp"

namespace fsa {

std::string to_string(Weighting w) { return w == Weighting::Equal ? "ew" : "vw"; }

namespace {

// Descending mean log-prob, firm_id ascending on ties (deterministic cuts).
struct RankedStock {
    std::string firm;
    double value;
};

void sort_desc(std::vector<RankedStock>& v) {
    std::sort(v.begin(), v.end(), [](const RankedStock& a, const RankedStock& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.firm < b.firm;
    });
}

}  // namespace

PortfolioLegs form_gpt_portfolio(const PredictionSet& predictions,
                                 const std::vector<std::string>& universe, int fiscal_year) {
    PortfolioLegs legs;
    legs.fiscal_year = fiscal_year;
    const std::set<std::string> in_universe(universe.begin(), universe.end());

    std::vector<RankedStock> longs, shorts;
    for (const auto& [key, e] : predictions.entries) {
        if (key.fiscal_year != fiscal_year || !in_universe.count(key.firm_id)) continue;
        if (!e.magnitude || !e.mean_logprob) continue;
        if (*e.magnitude == Magnitude::Small) continue;
        if (e.pred == 1) {
            longs.push_back({key.firm_id, *e.mean_logprob});
        } else {
            shorts.push_back({key.firm_id, *e.mean_logprob});
        }
    }
    sort_desc(longs);
    sort_desc(shorts);

    const size_t quota = static_cast<size_t>(0.10 * static_cast<double>(universe.size()));
    const size_t take = std::min({quota, longs.size(), shorts.size()});
    legs.shrunk = take < quota;
    for (size_t i = 0; i < take; ++i) {
        legs.long_leg.push_back(longs[i].firm);
        legs.short_leg.push_back(shorts[i].firm);
    }
    return legs;
}

std::optional<PortfolioLegs> form_decile_portfolio(const PredictionSet& predictions,
                                                   int fiscal_year) {
    std::vector<RankedStock> stocks;
    for (const auto& [key, e] : predictions.entries) {
        if (key.fiscal_year != fiscal_year || !e.score) continue;
        stocks.push_back({key.firm_id, *e.score});
    }
    if (stocks.size() < 10) return std::nullopt;
    sort_desc(stocks);
    const size_t k = stocks.size() / 10;
    PortfolioLegs legs;
    legs.fiscal_year = fiscal_year;
    for (size_t i = 0; i < k; ++i) legs.long_leg.push_back(stocks[i].firm);
    for (size_t i = stocks.size() - k; i < stocks.size(); ++i) {
        legs.short_leg.push_back(stocks[i].firm);
    }
    return legs;
}

ReturnsTable::ReturnsTable(const std::vector<MonthlyReturnRow>& rows) {
    for (const auto& r : rows) by_firm_[r.firm_id][r.month.v] = r;
}

std::optional<double> ReturnsTable::ret(const std::string& firm, MonthKey month) const {
    auto f = by_firm_.find(firm);
    if (f == by_firm_.end()) return std::nullopt;
    auto m = f->second.find(month.v);
    if (m == f->second.end()) return std::nullopt;
    return m->second.ret;
}

std::optional<double> ReturnsTable::market_equity(const std::string& firm, MonthKey month) const {
    auto f = by_firm_.find(firm);
    if (f == by_firm_.end()) return std::nullopt;
    auto m = f->second.find(month.v);
    if (m == f->second.end() || std::isnan(m->second.market_equity)) return std::nullopt;
    return m->second.market_equity;
}

SeriesStats series_stats(const std::map<MonthKey, double>& series) {
    SeriesStats s;
    s.n_months = static_cast<long>(series.size());
    if (series.empty()) return s;
    double sum = 0.0;
    for (const auto& [m, r] : series) sum += r;
    const double mean = sum / static_cast<double>(series.size());
    double ss = 0.0;
    for (const auto& [m, r] : series) ss += (r - mean) * (r - mean);
    const double stdev =
        series.size() > 1 ? std::sqrt(ss / static_cast<double>(series.size() - 1)) : 0.0;
    s.mean = mean * 100.0;
    s.stdev = stdev * 100.0;
    s.sharpe = stdev > 0.0 ? mean / stdev : 0.0;
    return s;
}

BacktestResult compute_returns(const std::vector<PortfolioLegs>& legs_by_year,
                               const ReturnsTable& returns, const BacktestOptions& options) {
    BacktestResult result;

    for (const auto& legs : legs_by_year) {
        if (legs.long_leg.empty() || legs.short_leg.empty()) {
            result.diagnostics.push_back(
                strf("formation year %d skipped: empty leg", legs.fiscal_year));
            continue;
        }
        // formation on June 30 of fiscal_year+1, held July..June
        const MonthKey first(legs.fiscal_year + 1, 7);
        auto run_leg = [&](const std::vector<std::string>& members,
                           std::map<MonthKey, double>& out) {
            std::set<std::string> alive(members.begin(), members.end());
            MonthKey m = first;
            for (int h = 0; h < 12; ++h, m = m.next()) {
                std::vector<std::pair<std::string, double>> rets;
                std::vector<std::string> dead;
                for (const auto& firm : alive) {
                    auto r = returns.ret(firm, m);
                    if (!r) {
                        dead.push_back(firm);  // drops out for the rest of the year
                        continue;
                    }
                    rets.emplace_back(firm, *r);
                }
                for (const auto& firm : dead) alive.erase(firm);
                if (rets.empty()) {
                    result.diagnostics.push_back(
                        strf("month %s: zero constituents, month dropped",
                             format_month(m).c_str()));
                    continue;
                }
                double total = 0.0;
                if (options.weighting == Weighting::Equal) {
                    for (const auto& [firm, r] : rets) total += r;
                    total /= static_cast<double>(rets.size());
                } else {
                    // previous-month market equity, falling back to the most
                    // recent known value at formation
                    MonthKey prev;
                    prev.v = m.v - 1;
                    double wsum = 0.0, acc = 0.0;
                    std::vector<std::pair<double, double>> weighted;
                    for (const auto& [firm, r] : rets) {
                        auto me = returns.market_equity(firm, prev);
                        if (!me) me = returns.market_equity(firm, m);
                        const double w = me.value_or(0.0);
                        if (w <= 0.0) continue;
                        weighted.emplace_back(w, r);
                        wsum += w;
                    }
                    if (weighted.empty() || wsum <= 0.0) {
                        // degenerate weights: fall back to equal weighting
                        for (const auto& [firm, r] : rets) acc += r;
                        total = acc / static_cast<double>(rets.size());
                    } else {
                        for (const auto& [w, r] : weighted) acc += w * r;
                        total = acc / wsum;
                    }
                }
                out[m] = total;
            }
        };
        run_leg(legs.long_leg, result.long_returns);
        run_leg(legs.short_leg, result.short_returns);
    }

    for (const auto& [m, lr] : result.long_returns) {
        auto it = result.short_returns.find(m);
        if (it == result.short_returns.end()) continue;
        result.hl_returns[m] = lr - it->second;
    }

    result.long_stats = series_stats(result.long_returns);
    result.short_stats = series_stats(result.short_returns);
    result.hl_stats = series_stats(result.hl_returns);
    if (options.transaction_cost_bps > 0.0) {
        std::map<MonthKey, double> after;
        const double haircut = 2.0 * options.transaction_cost_bps / 1e4;  // both legs
        for (const auto& [m, r] : result.hl_returns) after[m] = r - haircut;
        result.hl_stats_after_costs = series_stats(after);
    }
    return result;
}

std::vector<AlphaFit> fit_factor_alphas(const std::map<MonthKey, double>& hl_series,
                                        const std::vector<FactorRow>& factors,
                                        int newey_west_lags) {
    std::map<int, FactorRow> by_month;
    for (const auto& f : factors) by_month[f.month.v] = f;

    std::vector<double> y;
    std::vector<const FactorRow*> x;
    for (const auto& [m, r] : hl_series) {
        auto it = by_month.find(m.v);
        if (it == by_month.end()) continue;
        y.push_back(r);
        x.push_back(&it->second);
    }
    if (y.size() < 24) {
        throw Error(strf("factor regression refused: only %zu overlapping months (need 24)",
                         y.size()));
    }

    struct ModelSpec {
        const char* name;
        std::vector<const char*> factors;
    };
    const std::vector<ModelSpec> specs = {
        {"CAPM", {"mktrf"}},
        {"3F", {"mktrf", "smb", "hml"}},
        {"4F", {"mktrf", "smb", "hml", "mom"}},
        {"5F", {"mktrf", "smb", "hml", "rmw", "cma"}},
        {"5F+Mom", {"mktrf", "smb", "hml", "rmw", "cma", "mom"}},
    };
    auto factor_value = [](const FactorRow& row, const std::string& name) {
        if (name == "mktrf") return row.mktrf;
        if (name == "smb") return row.smb;
        if (name == "hml") return row.hml;
        if (name == "rmw") return row.rmw;
        if (name == "cma") return row.cma;
        if (name == "mom") return row.mom;
        throw Error("unknown factor: " + name);
    };

    const Eigen::Index n = static_cast<Eigen::Index>(y.size());
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<size_t>(i)];

    std::vector<AlphaFit> fits;
    for (const auto& spec : specs) {
        Eigen::MatrixXd xm(n, static_cast<Eigen::Index>(spec.factors.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (size_t j = 0; j < spec.factors.size(); ++j) {
                xm(i, static_cast<Eigen::Index>(j)) =
                    factor_value(*x[static_cast<size_t>(i)], spec.factors[j]);
            }
        }
        const OlsFit fit = ols_with_intercept(yv, xm, newey_west_lags);
        AlphaFit a;
        a.model = spec.name;
        a.alpha = fit.beta(0) * 100.0;
        a.t_stat = fit.t_stats(0);
        a.n_months = fit.n;
        for (size_t j = 0; j < spec.factors.size(); ++j) {
            a.betas[spec.factors[j]] = fit.beta(static_cast<Eigen::Index>(j) + 1);
        }
        fits.push_back(std::move(a));
    }
    return fits;
}

std::map<MonthKey, double> cumulative_log_returns(const std::map<MonthKey, double>& series) {
    std::map<MonthKey, double> out;
    double acc = 0.0;
    for (const auto& [m, r] : series) {
        acc += std::log1p(r);
        out[m] = acc;
    }
    return out;
}

}  // namespace fsa
