#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsa/backtest.hpp"
#include "fsa/rng.hpp"
#include "oracles.hpp"

using namespace fsa;

namespace {

PredEntry llm_entry(int pred, Magnitude mag, double logprob) {
    PredEntry e;
    e.pred = pred;
    e.magnitude = mag;
    e.mean_logprob = logprob;
    return e;
}

PredEntry prob_entry(double p) {
    PredEntry e;
    e.pred = p > 0.5 ? 1 : 0;
    e.score = p;
    return e;
}

std::vector<MonthlyReturnRow> flat_returns(const std::vector<std::string>& firms, int year,
                                           const std::map<std::string, double>& monthly,
                                           const std::map<std::string, double>& me = {}) {
    std::vector<MonthlyReturnRow> rows;
    MonthKey m(year + 1, 6);  // formation-month equity included
    for (int h = 0; h < 13; ++h, m = m.next()) {
        for (const auto& f : firms) {
            MonthlyReturnRow r;
            r.firm_id = f;
            r.month = m;
            r.ret = monthly.at(f);
            r.market_equity = me.count(f) ? me.at(f) : 1.0;
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace

TEST_CASE("confidence-sorted rule: quota, magnitude filter, shrink-to-match") {
    PredictionSet p;
    p.method = "gpt_cot";
    std::vector<std::string> universe;
    // 100 firms: 30 eligible increases, 25 eligible decreases, rest small/absent
    for (int i = 0; i < 100; ++i) {
        const std::string firm = strf("F%03d", i);
        universe.push_back(firm);
        if (i < 30) {
            p.entries[{firm, 2000}] =
                llm_entry(1, i % 2 ? Magnitude::Large : Magnitude::Moderate, -0.01 * i);
        } else if (i < 55) {
            p.entries[{firm, 2000}] =
                llm_entry(0, i % 2 ? Magnitude::Large : Magnitude::Moderate, -0.01 * i);
        } else if (i < 70) {
            p.entries[{firm, 2000}] = llm_entry(1, Magnitude::Small, -0.01 * i);
        }
    }
    const auto legs = form_gpt_portfolio(p, universe, 2000);
    CHECK(legs.long_leg.size() == 10);  // floor(0.10 * 100)
    CHECK(legs.short_leg.size() == 10);
    CHECK_FALSE(legs.shrunk);
    // long leg holds the ten highest log-probs among eligible increases
    for (int i = 0; i < 10; ++i) {
        CHECK(std::find(legs.long_leg.begin(), legs.long_leg.end(), strf("F%03d", i)) !=
              legs.long_leg.end());
    }
    // "small" predictions never enter a leg
    for (const auto& f : legs.long_leg) {
        const auto& e = p.entries.at({f, 2000});
        CHECK(*e.magnitude != Magnitude::Small);
    }
    // legs are disjoint
    for (const auto& f : legs.long_leg) {
        CHECK(std::find(legs.short_leg.begin(), legs.short_leg.end(), f) ==
              legs.short_leg.end());
    }
}

TEST_CASE("confidence-sorted rule shrinks both legs to the scarce side") {
    PredictionSet p;
    p.method = "gpt_cot";
    std::vector<std::string> universe;
    for (int i = 0; i < 100; ++i) universe.push_back(strf("F%03d", i));
    for (int i = 0; i < 30; ++i) {
        p.entries[{strf("F%03d", i), 2000}] = llm_entry(1, Magnitude::Large, -0.01 * i);
    }
    for (int i = 30; i < 38; ++i) {  // only 8 eligible shorts
        p.entries[{strf("F%03d", i), 2000}] = llm_entry(0, Magnitude::Moderate, -0.01 * i);
    }
    const auto legs = form_gpt_portfolio(p, universe, 2000);
    CHECK(legs.long_leg.size() == 8);
    CHECK(legs.short_leg.size() == 8);
    CHECK(legs.shrunk);
}

TEST_CASE("decile rule: legs of n/10, tie-break by firm id, sort-oracle match") {
    PredictionSet p;
    p.method = "logit";
    for (int i = 0; i < 20; ++i) {
        p.entries[{strf("F%03d", i), 2001}] = prob_entry(0.01 * i);
    }
    const auto legs = form_decile_portfolio(p, 2001);
    REQUIRE(legs.has_value());
    CHECK(legs->long_leg.size() == 2);
    CHECK(legs->short_leg.size() == 2);
    CHECK(legs->long_leg == std::vector<std::string>{"F019", "F018"});
    CHECK(legs->short_leg == std::vector<std::string>{"F001", "F000"});

    PredictionSet tiny;
    tiny.method = "logit";
    for (int i = 0; i < 9; ++i) tiny.entries[{strf("F%d", i), 2001}] = prob_entry(0.5);
    CHECK_FALSE(form_decile_portfolio(tiny, 2001).has_value());

    // equal probabilities everywhere: the documented tie-break decides
    PredictionSet flat;
    flat.method = "logit";
    for (int i = 0; i < 30; ++i) flat.entries[{strf("F%03d", i), 2001}] = prob_entry(0.4);
    const auto degenerate = form_decile_portfolio(flat, 2001);
    REQUIRE(degenerate.has_value());
    CHECK(degenerate->long_leg == std::vector<std::string>{"F000", "F001", "F002"});
    CHECK(degenerate->short_leg == std::vector<std::string>{"F027", "F028", "F029"});

    // 1000 random probabilities against the full-sort oracle
    Rng rng(31);
    PredictionSet big;
    big.method = "logit";
    std::vector<std::pair<std::string, double>> stocks;
    for (int i = 0; i < 1000; ++i) {
        const double prob = std::round(rng.uniform() * 100.0) / 100.0;
        big.entries[{strf("F%04d", i), 2001}] = prob_entry(prob);
        stocks.emplace_back(strf("F%04d", i), prob);
    }
    const auto fast = form_decile_portfolio(big, 2001);
    REQUIRE(fast.has_value());
    std::vector<std::string> long_oracle, short_oracle;
    oracle::decile_legs(stocks, long_oracle, short_oracle);
    CHECK(fast->long_leg == long_oracle);
    CHECK(fast->short_leg == short_oracle);
}

TEST_CASE("equal weighting averages constituents; value weighting uses prior equity") {
    PortfolioLegs legs;
    legs.fiscal_year = 2000;
    legs.long_leg = {"A", "B"};
    legs.short_leg = {"C"};
    const auto rows =
        flat_returns({"A", "B", "C"}, 2000, {{"A", 0.01}, {"B", 0.03}, {"C", 0.0}},
                     {{"A", 100.0}, {"B", 100.0}, {"C", 50.0}});

    BacktestOptions ew;
    const BacktestResult r = compute_returns({legs}, ReturnsTable(rows), ew);
    REQUIRE(r.long_returns.size() == 12);
    CHECK(r.long_returns.begin()->second == doctest::Approx(0.02));
    CHECK(r.hl_returns.begin()->second == doctest::Approx(0.02));

    // weights 0.8 / 0.2 with returns 1% / 6% give 2%
    PortfolioLegs vw_legs;
    vw_legs.fiscal_year = 2000;
    vw_legs.long_leg = {"A", "B"};
    vw_legs.short_leg = {"C"};
    const auto vw_rows =
        flat_returns({"A", "B", "C"}, 2000, {{"A", 0.01}, {"B", 0.06}, {"C", 0.0}},
                     {{"A", 800.0}, {"B", 200.0}, {"C", 10.0}});
    BacktestOptions vw;
    vw.weighting = Weighting::Value;
    const BacktestResult rv = compute_returns({vw_legs}, ReturnsTable(vw_rows), vw);
    // weights drift after the first month; the first month is exactly 2%
    CHECK(rv.long_returns.begin()->second == doctest::Approx(0.02));
    // value-weighted leg return stays inside constituent bounds every month
    for (const auto& [m, ret] : rv.long_returns) {
        CHECK(ret >= 0.01 - 1e-12);
        CHECK(ret <= 0.06 + 1e-12);
    }

    // EW is invariant to scaling every market equity
    const auto scaled_rows =
        flat_returns({"A", "B", "C"}, 2000, {{"A", 0.01}, {"B", 0.03}, {"C", 0.0}},
                     {{"A", 1e6}, {"B", 1e6}, {"C", 1e6}});
    const BacktestResult r2 = compute_returns({legs}, ReturnsTable(scaled_rows), ew);
    CHECK(r2.hl_stats.mean == doctest::Approx(r.hl_stats.mean));
}

TEST_CASE("delisted constituents drop out and weights renormalize") {
    PortfolioLegs legs;
    legs.fiscal_year = 2000;
    legs.long_leg = {"A", "B"};
    legs.short_leg = {"C"};
    auto rows = flat_returns({"A", "B", "C"}, 2000, {{"A", 0.02}, {"B", 0.10}, {"C", 0.0}});
    // B disappears after September 2001
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [](const MonthlyReturnRow& r) {
                                  return r.firm_id == "B" && r.month > MonthKey(2001, 9);
                              }),
               rows.end());
    BacktestOptions opt;
    const BacktestResult r = compute_returns({legs}, ReturnsTable(rows), opt);
    CHECK(r.long_returns.at(MonthKey(2001, 9)) == doctest::Approx(0.06));
    CHECK(r.long_returns.at(MonthKey(2001, 10)) == doctest::Approx(0.02));  // A only
    CHECK(r.long_returns.at(MonthKey(2002, 6)) == doctest::Approx(0.02));
}

TEST_CASE("series statistics: percent units and scale-invariant Sharpe") {
    std::map<MonthKey, double> series;
    Rng rng(5);
    MonthKey m(2000, 1);
    for (int i = 0; i < 60; ++i, m = m.next()) series[m] = 0.01 + 0.002 * rng.normal();
    const SeriesStats s = series_stats(series);
    std::map<MonthKey, double> scaled;
    for (const auto& [k, v] : series) scaled[k] = 3.0 * v;
    const SeriesStats s3 = series_stats(scaled);
    CHECK(s3.mean == doctest::Approx(3.0 * s.mean));
    CHECK(s3.stdev == doctest::Approx(3.0 * s.stdev));
    CHECK(s3.sharpe == doctest::Approx(s.sharpe).epsilon(1e-12));
}

TEST_CASE("reference arithmetic: mean 1.28, stdev 0.38 gives Sharpe 3.36") {
    // an analytic series with exact sample mean and stdev
    std::map<MonthKey, double> series;
    MonthKey m(2000, 1);
    const int n = 24;
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = i % 2 == 0 ? 1.0 : -1.0;  // mean 0, var 1*(n/(n-1))
    // normalize to sample stdev exactly 1
    const double sample_sd = std::sqrt(static_cast<double>(n) / (n - 1.0));
    for (int i = 0; i < n; ++i, m = m.next()) {
        series[m] = 0.0128 + 0.0038 * (z[i] / sample_sd);
    }
    const SeriesStats s = series_stats(series);
    CHECK(s.mean == doctest::Approx(1.28).epsilon(1e-9));
    CHECK(s.stdev == doctest::Approx(0.38).epsilon(1e-9));
    CHECK(std::abs(s.sharpe - 3.36) <= 0.01);
}

TEST_CASE("factor alphas: exact market exposure and orthogonal-factor invariance") {
    std::vector<FactorRow> factors;
    std::map<MonthKey, double> hl;
    Rng rng(9);
    MonthKey m(1990, 1);
    for (int i = 0; i < 240; ++i, m = m.next()) {
        FactorRow f;
        f.month = m;
        f.mktrf = 0.01 * rng.normal();
        f.smb = 0.01 * rng.normal();
        f.hml = 0.01 * rng.normal();
        f.rmw = 0.01 * rng.normal();
        f.cma = 0.01 * rng.normal();
        f.mom = 0.01 * rng.normal();
        factors.push_back(f);
        hl[m] = f.mktrf;  // exactly the market factor
    }
    const auto fits = fit_factor_alphas(hl, factors);
    REQUIRE(fits.size() == 5);
    CHECK(fits[0].model == "CAPM");
    CHECK(fits[0].alpha == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(fits[0].betas.at("mktrf") == doctest::Approx(1.0).epsilon(1e-12));
    // adding orthogonal factors leaves the alpha at zero on noiseless data
    CHECK(fits[4].model == "5F+Mom");
    CHECK(std::abs(fits[4].alpha) < 1e-8);
    CHECK(fits[4].betas.at("mktrf") == doctest::Approx(1.0).epsilon(1e-9));

    // too little overlap is refused
    std::map<MonthKey, double> tiny(hl.begin(), std::next(hl.begin(), 12));
    CHECK_THROWS_AS(fit_factor_alphas(tiny, factors), Error);
}

TEST_CASE("simulated CAPM series recovers alpha and beta") {
    std::vector<FactorRow> factors;
    std::map<MonthKey, double> hl;
    Rng rng(77);
    MonthKey m(1970, 1);
    for (int i = 0; i < 600; ++i, m = m.next()) {
        FactorRow f;
        f.month = m;
        f.mktrf = 0.045 * rng.normal();
        factors.push_back(f);
        hl[m] = 0.005 + 1.0 * f.mktrf + 0.001 * rng.normal();
    }
    const auto fits = fit_factor_alphas(hl, factors);
    CHECK(fits[0].alpha >= 0.45);
    CHECK(fits[0].alpha <= 0.55);
    CHECK(fits[0].betas.at("mktrf") >= 0.97);
    CHECK(fits[0].betas.at("mktrf") <= 1.03);
    CHECK(fits[0].t_stat > 10.0);
}

TEST_CASE("transaction-cost overlay reduces the H-L series") {
    PortfolioLegs legs;
    legs.fiscal_year = 2000;
    legs.long_leg = {"A"};
    legs.short_leg = {"B"};
    const auto rows = flat_returns({"A", "B"}, 2000, {{"A", 0.02}, {"B", 0.0}});
    BacktestOptions opt;
    opt.transaction_cost_bps = 10.0;
    const BacktestResult r = compute_returns({legs}, ReturnsTable(rows), opt);
    CHECK(r.hl_stats.mean == doctest::Approx(2.0));
    CHECK(r.hl_stats_after_costs.mean == doctest::Approx(2.0 - 0.2));  // 2 x 10bps
}

TEST_CASE("formation only sees information dated before the formation date") {
    // legs for fiscal year t come solely from year-t predictions (statements
    // dated December 31 of t), and holding starts the month after the
    // June 30 formation of t+1
    PredictionSet p;
    p.method = "gpt_cot";
    p.entries[{"A", 2000}] = llm_entry(1, Magnitude::Large, -0.1);
    p.entries[{"B", 2000}] = llm_entry(0, Magnitude::Large, -0.1);
    p.entries[{"C", 2001}] = llm_entry(1, Magnitude::Large, -0.05);  // future info
    const auto legs = form_gpt_portfolio(p, {"A", "B", "C"}, 2000);
    for (const auto& f : legs.long_leg) CHECK(f != "C");
    for (const auto& f : legs.short_leg) CHECK(f != "C");
    const Date statement_date{2000, 12, 31};
    const Date formation{2001, 6, 30};
    CHECK(statement_date < formation);

    PortfolioLegs one;
    one.fiscal_year = 2000;
    one.long_leg = {"A"};
    one.short_leg = {"B"};
    const auto rows = flat_returns({"A", "B"}, 2000, {{"A", 0.01}, {"B", 0.0}});
    const BacktestResult r = compute_returns({one}, ReturnsTable(rows), BacktestOptions{});
    REQUIRE_FALSE(r.hl_returns.empty());
    const MonthKey first_holding = r.hl_returns.begin()->first;
    CHECK(first_holding == MonthKey(2001, 7));
    CHECK(Date{first_holding.year(), first_holding.month(), 1} > formation);
}

TEST_CASE("cumulative log returns accumulate log1p") {
    std::map<MonthKey, double> series;
    series[MonthKey(2000, 1)] = 0.1;
    series[MonthKey(2000, 2)] = -0.05;
    const auto cum = cumulative_log_returns(series);
    CHECK(cum.at(MonthKey(2000, 1)) == doctest::Approx(std::log(1.1)));
    CHECK(cum.at(MonthKey(2000, 2)) == doctest::Approx(std::log(1.1) + std::log(0.95)));
}
