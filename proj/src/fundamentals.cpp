#include "fsa/fundamentals.hpp"

#include <algorithm>
#include <cmath>

namespace fsa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool within(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// First required item that is NaN in any provided year, if any.
std::optional<std::string> find_missing_required(const FirmYearRecord& rec) {
    const auto& bs = balance_sheet_items();
    for (size_t i = 0; i < bs.size(); ++i) {
        if (!bs[i].required) continue;
        if (std::isnan(rec.bs_t[i]) || std::isnan(rec.bs_t1[i])) return bs[i].id;
    }
    const auto& is = income_statement_items();
    for (size_t i = 0; i < is.size(); ++i) {
        if (!is[i].required) continue;
        if (std::isnan(rec.is_t[i]) || std::isnan(rec.is_t1[i]) || std::isnan(rec.is_t2[i]))
            return is[i].id;
    }
    return std::nullopt;
}

}  // namespace

std::string to_string(FilterReason r) {
    switch (r) {
        case FilterReason::MissingField: return "missing field";
        case FilterReason::AssetsBelowMinimum: return "assets below minimum";
        case FilterReason::PriceBelowMinimum: return "price below minimum";
        case FilterReason::NonCalendarYearEnd: return "non-calendar year end";
        case FilterReason::BalanceIdentity: return "balance identity";
        case FilterReason::IncomeRollup: return "income rollup";
    }
    return "unknown";
}

bool balance_identity_holds(const FirmYearRecord& rec, double tol) {
    static const size_t at = balance_sheet_index("at");
    static const size_t lt = balance_sheet_index("lt");
    static const size_t teq = balance_sheet_index("teq");
    return within(rec.bs_t[at], rec.bs_t[lt] + rec.bs_t[teq], tol) &&
           within(rec.bs_t1[at], rec.bs_t1[lt] + rec.bs_t1[teq], tol);
}

bool income_rollup_holds(const FirmYearRecord& rec, double tol) {
    static const size_t sale = income_statement_index("sale");
    static const size_t cogs = income_statement_index("cogs");
    static const size_t gp = income_statement_index("gp");
    static const size_t xsga = income_statement_index("xsga");
    static const size_t oibdp = income_statement_index("oibdp");
    static const size_t dp = income_statement_index("dp");
    static const size_t oiadp = income_statement_index("oiadp");
    for (const auto* year : {&rec.is_t, &rec.is_t1, &rec.is_t2}) {
        const auto& v = *year;
        if (!within(v[gp], v[sale] - v[cogs], tol)) return false;
        if (!within(v[oibdp], v[gp] - v[xsga], tol)) return false;
        if (!within(v[oiadp], v[oibdp] - v[dp], tol)) return false;
    }
    return true;
}

FilterOutcome apply_sample_filters(const std::vector<FirmYearRecord>& records) {
    FilterOutcome out;
    for (const auto& rec : records) {
        if (std::isnan(rec.total_assets())) {
            out.rejected.push_back({rec.key(), FilterReason::MissingField, "at"});
            continue;
        }
        if (std::isnan(rec.year_end_price)) {
            out.rejected.push_back({rec.key(), FilterReason::MissingField, "price"});
            continue;
        }
        if (auto missing = find_missing_required(rec)) {
            out.rejected.push_back({rec.key(), FilterReason::MissingField, *missing});
            continue;
        }
        if (!(rec.total_assets() > 1.0)) {
            out.rejected.push_back({rec.key(), FilterReason::AssetsBelowMinimum, ""});
            continue;
        }
        if (!(rec.year_end_price > 1.0)) {
            out.rejected.push_back({rec.key(), FilterReason::PriceBelowMinimum, ""});
            continue;
        }
        if (rec.fiscal_year_end.month != 12 || rec.fiscal_year_end.day != 31) {
            out.rejected.push_back({rec.key(), FilterReason::NonCalendarYearEnd, ""});
            continue;
        }
        if (!balance_identity_holds(rec)) {
            out.rejected.push_back({rec.key(), FilterReason::BalanceIdentity, ""});
            continue;
        }
        if (!income_rollup_holds(rec)) {
            out.rejected.push_back({rec.key(), FilterReason::IncomeRollup, ""});
            continue;
        }
        out.kept.push_back(rec);
    }
    return out;
}

std::vector<Target> build_target(const Panel& panel) {
    std::vector<Target> out;
    for (const auto& [firm, years] : panel.rows()) {
        for (const auto& [year, row] : years) {
            auto eps_t = panel.eps(firm, year);
            auto eps_next = panel.eps(firm, year + 1);
            if (!eps_t || !eps_next) continue;
            out.push_back({{firm, year}, *eps_next > *eps_t ? 1 : 0});
        }
    }
    return out;
}

std::map<FirmYear, int> target_map(const std::vector<Target>& targets) {
    std::map<FirmYear, int> m;
    for (const auto& t : targets) m[t.key] = t.increase;
    return m;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return values[rank - 1];
}

void winsorize(std::vector<double>& values, double lo_p, double hi_p) {
    const double lo = percentile_nearest_rank(values, lo_p);
    const double hi = percentile_nearest_rank(values, hi_p);
    if (std::isnan(lo) || std::isnan(hi)) return;
    for (double& v : values) {
        if (std::isnan(v)) continue;
        v = std::clamp(v, lo, hi);
    }
}

std::map<FirmYear, FirmCharacteristics> compute_characteristics(const Panel& panel) {
    static const size_t ib_idx = income_statement_index("ib");

    std::map<FirmYear, FirmCharacteristics> out;
    for (const auto& rec : panel.records()) {
        FirmCharacteristics c;
        const double at = rec.total_assets();
        if (!(at > 0.0)) {
            c.usable = false;
            out[rec.key()] = c;
            continue;
        }
        c.size = std::log(at);
        const double me = rec.market_equity;
        c.btom = (me > 0.0 && !std::isnan(rec.book_equity())) ? rec.book_equity() / me : kNaN;
        c.leverage = rec.total_debt() / at;
        const double ppent = rec.bs_item("ppent");
        c.ppe = std::isnan(ppent) ? kNaN : std::clamp(ppent / at, 0.0, 1.0);
        const double ib = rec.is_t[ib_idx];
        c.loss = (!std::isnan(ib) && ib < 0.0) ? 1 : 0;

        // stdev of income before extraordinary items over years t-4..t,
        // needing at least 3 observations, scaled by current assets.
        std::vector<double> hist;
        for (int lag = 0; lag < 5; ++lag) {
            const FirmYearRow* row = panel.row(rec.firm_id, rec.fiscal_year - lag);
            if (row && row->is[ib_idx]) hist.push_back(*row->is[ib_idx]);
        }
        if (hist.size() >= 3) {
            double mean = 0.0;
            for (double v : hist) mean += v;
            mean /= static_cast<double>(hist.size());
            double ss = 0.0;
            for (double v : hist) ss += (v - mean) * (v - mean);
            c.earnings_volatility = std::sqrt(ss / static_cast<double>(hist.size() - 1)) / at;
        }
        out[rec.key()] = c;
    }

    // Pooled 1%/99% winsorization of the continuous fields.
    auto winsorize_field = [&out](double FirmCharacteristics::*field) {
        std::vector<double> pool;
        pool.reserve(out.size());
        for (const auto& [k, c] : out)
            if (c.usable) pool.push_back(c.*field);
        const double lo = percentile_nearest_rank(pool, 0.01);
        const double hi = percentile_nearest_rank(pool, 0.99);
        if (std::isnan(lo) || std::isnan(hi)) return;
        for (auto& [k, c] : out) {
            if (!c.usable || std::isnan(c.*field)) continue;
            c.*field = std::clamp(c.*field, lo, hi);
        }
    };
    winsorize_field(&FirmCharacteristics::size);
    winsorize_field(&FirmCharacteristics::btom);
    winsorize_field(&FirmCharacteristics::leverage);
    winsorize_field(&FirmCharacteristics::earnings_volatility);
    winsorize_field(&FirmCharacteristics::ppe);
    return out;
}

}  // namespace fsa
