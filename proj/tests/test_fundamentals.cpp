#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsa/fundamentals.hpp"
#include "fsa/rng.hpp"
#include "oracles.hpp"

using namespace fsa;

namespace {

const std::string kFixture = std::string(FSA_SOURCE_DIR) + "/data/fixtures/sample_firm.csv";

FirmYearRecord fixture_record() {
    const Panel panel = Panel::load(kFixture);
    const FirmYearRecord* rec = panel.record({"SAMPLE", 2005});
    REQUIRE(rec != nullptr);
    return *rec;
}

void set_bs(FirmYearRecord& rec, const std::string& id, double v, int lag = 0) {
    (lag == 0 ? rec.bs_t : rec.bs_t1)[balance_sheet_index(id)] = v;
}

}  // namespace

TEST_CASE("sample filters: reference record is retained") {
    const auto outcome = apply_sample_filters({fixture_record()});
    REQUIRE(outcome.kept.size() == 1);
    CHECK(outcome.rejected.empty());
    CHECK(outcome.kept[0].total_assets() == doctest::Approx(843.132));
}

TEST_CASE("sample filters: threshold and identity rejections") {
    FirmYearRecord rec = fixture_record();

    SUBCASE("assets below one million") {
        // rescale so the identity still holds but assets are tiny
        set_bs(rec, "at", 0.8);
        set_bs(rec, "lt", 0.5);
        set_bs(rec, "teq", 0.3);
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::AssetsBelowMinimum);
    }
    SUBCASE("price at or below one dollar") {
        rec.year_end_price = 1.0;
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::PriceBelowMinimum);
    }
    SUBCASE("non-December fiscal year end") {
        rec.fiscal_year_end = {2005, 6, 30};
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::NonCalendarYearEnd);
    }
    SUBCASE("stated assets exceed liabilities plus equity") {
        set_bs(rec, "at", rec.total_assets() + 0.5);
        set_bs(rec, "lse", rec.bs_item("lse") + 0.5);
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::BalanceIdentity);
        CHECK(to_string(outcome.rejected[0].reason) == "balance identity");
    }
    SUBCASE("identity violation just inside tolerance is kept") {
        set_bs(rec, "at", rec.total_assets() + 0.0009);
        const auto outcome = apply_sample_filters({rec});
        CHECK(outcome.kept.size() == 1);
    }
    SUBCASE("broken income roll-up") {
        rec.is_t[income_statement_index("gp")] += 0.01;
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::IncomeRollup);
    }
    SUBCASE("missing total assets") {
        set_bs(rec, "at", std::numeric_limits<double>::quiet_NaN());
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::MissingField);
        CHECK(outcome.rejected[0].detail == "at");
    }
    SUBCASE("missing required income item names the item") {
        rec.is_t1[income_statement_index("sale")] = std::numeric_limits<double>::quiet_NaN();
        const auto outcome = apply_sample_filters({rec});
        REQUIRE(outcome.rejected.size() == 1);
        CHECK(outcome.rejected[0].reason == FilterReason::MissingField);
        CHECK(outcome.rejected[0].detail == "sale");
    }
}

TEST_CASE("filtering is idempotent and never aborts the batch") {
    std::vector<FirmYearRecord> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(fixture_record());
    batch[1].year_end_price = 0.5;
    batch[3].bs_t[balance_sheet_index("at")] += 1.0;
    const auto once = apply_sample_filters(batch);
    CHECK(once.kept.size() == 4);
    CHECK(once.rejected.size() == 2);
    const auto twice = apply_sample_filters(once.kept);
    CHECK(twice.kept.size() == once.kept.size());
    CHECK(twice.rejected.empty());
}

TEST_CASE("build_target: strict increase, ties to zero, missing successor omitted") {
    Panel panel = Panel::load(kFixture);
    const auto targets = build_target(panel);
    // years 2003..2005 with EPS 3.82, 0.54, 1.47
    REQUIRE(targets.size() == 2);
    const auto m = target_map(targets);
    CHECK(m.at({"SAMPLE", 2003}) == 0);  // 0.54 < 3.82
    CHECK(m.at({"SAMPLE", 2004}) == 1);  // 1.47 > 0.54
    CHECK_FALSE(m.count({"SAMPLE", 2005}));  // no 2006 row

    // exact tie maps to zero
    Panel tie = panel;
    auto row = *tie.row("SAMPLE", 2005);
    row.fiscal_year = 2006;
    row.is[income_statement_index("epspx")] = 1.47;
    tie.add_row(row);
    tie.assemble_records();
    CHECK(target_map(build_target(tie)).at({"SAMPLE", 2005}) == 0);
}

TEST_CASE("no target references a firm-year whose successor is absent") {
    const Panel panel = Panel::load(kFixture);
    for (const auto& t : build_target(panel)) {
        CHECK(panel.row(t.key.firm_id, t.key.fiscal_year + 1) != nullptr);
    }
}

TEST_CASE("characteristics definitions") {
    Panel panel = Panel::load(kFixture);
    const auto chars = compute_characteristics(panel);
    const auto& c = chars.at({"SAMPLE", 2005});
    CHECK(c.size == doctest::Approx(std::log(843.132)));
    CHECK(c.leverage == doctest::Approx((49.066 + 0.153) / 843.132));
    CHECK(c.btom == doctest::Approx(467.201 / 3479.8));
    CHECK(c.ppe == doctest::Approx(90.754 / 843.132));
    CHECK(c.loss == 0);
    // exactly three annual income observations exist: volatility defined
    CHECK(std::isfinite(c.earnings_volatility));
    const double mean = (201.412 + 74.438 + 518.834) / 3.0;
    const double ss = std::pow(201.412 - mean, 2) + std::pow(74.438 - mean, 2) +
                      std::pow(518.834 - mean, 2);
    CHECK(c.earnings_volatility == doctest::Approx(std::sqrt(ss / 2.0) / 843.132));
}

TEST_CASE("log of total assets: e^6 gives size 6") {
    Panel panel = Panel::load(kFixture);
    auto row = *panel.row("SAMPLE", 2005);
    // rescale the balance sheet so that total assets are exactly e^6
    const double scale = std::exp(6.0) / 843.132;
    for (auto& v : row.bs) {
        if (v) v = *v * scale;
    }
    Panel p2;
    p2.add_row(*panel.row("SAMPLE", 2003));
    p2.add_row(*panel.row("SAMPLE", 2004));
    p2.add_row(row);
    p2.assemble_records();
    const auto chars = compute_characteristics(p2);
    CHECK(chars.at({"SAMPLE", 2005}).size == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("constant earnings history gives zero volatility") {
    Panel panel = Panel::load(kFixture);
    Panel p2;
    for (int year : {2003, 2004, 2005}) {
        auto row = *panel.row("SAMPLE", year);
        row.is[income_statement_index("ib")] = 100.0;
        p2.add_row(row);
    }
    p2.assemble_records();
    CHECK(compute_characteristics(p2).at({"SAMPLE", 2005}).earnings_volatility ==
          doctest::Approx(0.0));
}

TEST_CASE("winsorization clips exactly at the sort-based percentiles") {
    Rng rng(42);
    std::vector<double> values(1000);
    for (auto& v : values) v = rng.normal(0.0, 10.0);
    const double lo = oracle::percentile(values, 0.01);
    const double hi = oracle::percentile(values, 0.99);

    std::vector<double> w = values;
    winsorize(w);
    double min_w = w[0], max_w = w[0];
    for (double v : w) {
        min_w = std::min(min_w, v);
        max_w = std::max(max_w, v);
    }
    CHECK(min_w == lo);
    CHECK(max_w == hi);

    // order statistics strictly inside the clip points are untouched
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i] > lo && values[i] < hi) CHECK(w[i] == values[i]);
    }
}

TEST_CASE("percentile handles NaNs and degenerate sizes") {
    std::vector<double> v = {std::numeric_limits<double>::quiet_NaN(), 3.0, 1.0, 2.0};
    CHECK(percentile_nearest_rank(v, 0.5) == 2.0);
    CHECK(percentile_nearest_rank(v, 0.0) == 1.0);
    CHECK(percentile_nearest_rank(v, 1.0) == 3.0);
    std::vector<double> empty;
    CHECK(std::isnan(percentile_nearest_rank(empty, 0.5)));
}
