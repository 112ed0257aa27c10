#include "fsa/records.hpp"

#include <cmath>
#include <limits>

#include "fsa/csv.hpp"

namespace fsa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Leaf items default to 0.0 when absent; required items stay NaN so that the
// filters / renderer can reject them by name.
std::vector<double> finalize_items(const std::vector<LineItem>& tmpl,
                                   const std::vector<std::optional<double>>& raw) {
    std::vector<double> out(tmpl.size(), kNaN);
    for (size_t i = 0; i < tmpl.size(); ++i) {
        if (raw[i]) {
            out[i] = *raw[i];
        } else if (!tmpl[i].required) {
            out[i] = 0.0;
        }
    }
    return out;
}

// "txt" is derivable from its three components when omitted.
void derive_total_taxes(std::vector<std::optional<double>>& is_raw) {
    static const size_t txt = income_statement_index("txt");
    static const size_t txc = income_statement_index("txc");
    static const size_t txdi = income_statement_index("txdi");
    static const size_t txo = income_statement_index("txo");
    if (!is_raw[txt]) {
        is_raw[txt] = is_raw[txc].value_or(0.0) + is_raw[txdi].value_or(0.0) +
                      is_raw[txo].value_or(0.0);
    }
}

}  // namespace

double FirmYearRecord::bs_item(const std::string& id, int lag) const {
    const size_t i = balance_sheet_index(id);
    switch (lag) {
        case 0: return bs_t[i];
        case 1: return bs_t1[i];
        default: throw Error("balance sheet lag out of range: " + std::to_string(lag));
    }
}

double FirmYearRecord::is_item(const std::string& id, int lag) const {
    const size_t i = income_statement_index(id);
    switch (lag) {
        case 0: return is_t[i];
        case 1: return is_t1[i];
        case 2: return is_t2[i];
        default: throw Error("income statement lag out of range: " + std::to_string(lag));
    }
}

std::vector<std::string> fundamentals_csv_header() {
    std::vector<std::string> h = {"firm_id", "fiscal_year", "industry_code",
                                  "fiscal_year_end", "price", "market_equity"};
    for (const auto& item : balance_sheet_items()) h.push_back(item.id);
    for (const auto& item : income_statement_items()) h.push_back(item.id);
    return h;
}

Panel Panel::load(const std::string& path) {
    const CsvTable t = CsvTable::read_file(path);
    Panel panel;
    const auto& bs_tmpl = balance_sheet_items();
    const auto& is_tmpl = income_statement_items();
    for (size_t r = 0; r < t.rows(); ++r) {
        FirmYearRow row;
        row.firm_id = t.cell(r, "firm_id");
        if (row.firm_id.empty()) throw Error(strf("%s: row %zu missing firm_id", path.c_str(), r));
        auto year = t.integer(r, "fiscal_year");
        if (!year) throw Error(strf("%s: row %zu missing fiscal_year", path.c_str(), r));
        row.fiscal_year = *year;
        row.industry_code = t.integer(r, "industry_code").value_or(0);
        const std::string& fye = t.cell(r, "fiscal_year_end");
        row.fiscal_year_end =
            fye.empty() ? Date{row.fiscal_year, 12, 31} : parse_date(fye);
        row.price = t.number(r, "price");
        row.market_equity = t.number(r, "market_equity");
        row.bs.resize(bs_tmpl.size());
        for (size_t i = 0; i < bs_tmpl.size(); ++i) row.bs[i] = t.number(r, bs_tmpl[i].id);
        row.is.resize(is_tmpl.size());
        for (size_t i = 0; i < is_tmpl.size(); ++i) row.is[i] = t.number(r, is_tmpl[i].id);
        panel.add_row(std::move(row));
    }
    panel.assemble_records();
    return panel;
}

void Panel::add_row(FirmYearRow row) {
    if (row.bs.size() != balance_sheet_items().size() ||
        row.is.size() != income_statement_items().size()) {
        throw Error("FirmYearRow with wrong template width");
    }
    rows_[row.firm_id][row.fiscal_year] = std::move(row);
}

void Panel::assemble_records() {
    records_.clear();
    record_index_.clear();
    for (const auto& [firm, years] : rows_) {
        for (const auto& [year, row] : years) {
            auto prev = years.find(year - 1);
            auto prev2 = years.find(year - 2);
            if (prev == years.end() || prev2 == years.end()) continue;

            FirmYearRecord rec;
            rec.firm_id = firm;
            rec.fiscal_year = year;
            rec.industry_code = row.industry_code;
            rec.fiscal_year_end = row.fiscal_year_end;
            rec.year_end_price = row.price.value_or(kNaN);
            rec.market_equity = row.market_equity.value_or(kNaN);

            auto bs_raw_t = row.bs;
            auto bs_raw_t1 = prev->second.bs;
            auto is_raw_t = row.is;
            auto is_raw_t1 = prev->second.is;
            auto is_raw_t2 = prev2->second.is;
            derive_total_taxes(is_raw_t);
            derive_total_taxes(is_raw_t1);
            derive_total_taxes(is_raw_t2);

            rec.bs_t = finalize_items(balance_sheet_items(), bs_raw_t);
            rec.bs_t1 = finalize_items(balance_sheet_items(), bs_raw_t1);
            rec.is_t = finalize_items(income_statement_items(), is_raw_t);
            rec.is_t1 = finalize_items(income_statement_items(), is_raw_t1);
            rec.is_t2 = finalize_items(income_statement_items(), is_raw_t2);

            record_index_[rec.key()] = records_.size();
            records_.push_back(std::move(rec));
        }
    }
}

const FirmYearRow* Panel::row(const std::string& firm, int year) const {
    auto f = rows_.find(firm);
    if (f == rows_.end()) return nullptr;
    auto y = f->second.find(year);
    return y == f->second.end() ? nullptr : &y->second;
}

const FirmYearRecord* Panel::record(const FirmYear& key) const {
    auto it = record_index_.find(key);
    return it == record_index_.end() ? nullptr : &records_[it->second];
}

std::optional<double> Panel::eps(const std::string& firm, int year) const {
    const FirmYearRow* r = row(firm, year);
    if (!r) return std::nullopt;
    static const size_t idx = income_statement_index("epspx");
    return r->is[idx];
}

std::vector<AnalystForecastRecord> load_analyst_forecasts(const std::string& path) {
    const CsvTable t = CsvTable::read_file(path);
    std::vector<AnalystForecastRecord> out;
    out.reserve(t.rows());
    for (size_t r = 0; r < t.rows(); ++r) {
        AnalystForecastRecord f;
        f.firm_id = t.cell(r, "firm_id");
        f.fiscal_year_forecasted = t.integer(r, "fiscal_year_forecasted").value_or(0);
        f.analyst_id = t.cell(r, "analyst_id");
        auto eps = t.number(r, "forecast_eps");
        if (!eps) continue;  // forecast without a value is useless
        f.forecast_eps = *eps;
        f.issue_date = parse_date(t.cell(r, "issue_date"));
        f.prior_earnings_release_date = parse_date(t.cell(r, "release_date"));
        // Retention invariant: forecasts predating the release are dropped.
        if (f.issue_date < f.prior_earnings_release_date) continue;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<MonthlyReturnRow> load_monthly_returns(const std::string& path) {
    const CsvTable t = CsvTable::read_file(path);
    std::vector<MonthlyReturnRow> out;
    out.reserve(t.rows());
    for (size_t r = 0; r < t.rows(); ++r) {
        MonthlyReturnRow row;
        row.firm_id = t.cell(r, "firm_id");
        row.month = parse_month(t.cell(r, "month"));
        auto ret = t.number(r, "return");
        if (!ret) continue;
        row.ret = *ret;
        row.market_equity = t.number(r, "market_equity").value_or(kNaN);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<FactorRow> load_factors(const std::string& path) {
    const CsvTable t = CsvTable::read_file(path);
    std::vector<FactorRow> out;
    out.reserve(t.rows());
    for (size_t r = 0; r < t.rows(); ++r) {
        FactorRow row;
        row.month = parse_month(t.cell(r, "month"));
        row.mktrf = t.number(r, "mktrf").value_or(0.0);
        row.smb = t.number(r, "smb").value_or(0.0);
        row.hml = t.number(r, "hml").value_or(0.0);
        row.rmw = t.number(r, "rmw").value_or(0.0);
        row.cma = t.number(r, "cma").value_or(0.0);
        row.mom = t.number(r, "mom").value_or(0.0);
        row.rf = t.number(r, "rf").value_or(0.0);
        out.push_back(row);
    }
    return out;
}

}  // namespace fsa
