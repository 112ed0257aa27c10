#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsa/common.hpp"
#include "fsa/dates.hpp"
#include "fsa/statement_template.hpp"

namespace fsa {

/// One fundamentals CSV row: a single firm-year's statement amounts plus
/// identifiers. Missing cells stay unset here; zero-fill policy is applied
/// when rows are assembled into records.
struct FirmYearRow {
    std::string firm_id;
    int fiscal_year = 0;
    int industry_code = 0;  // two-digit classifier
    Date fiscal_year_end;
    std::optional<double> price;          // year-end, currency/share
    std::optional<double> market_equity;  // currency millions
    std::vector<std::optional<double>> bs;  // aligned with balance_sheet_items()
    std::vector<std::optional<double>> is;  // aligned with income_statement_items()
};

/// One firm-year ready for filtering/rendering: two years of balance sheet,
/// three years of income statement, all template slots populated (optional
/// leaves zero-filled; required items may still be NaN if absent upstream,
/// which the filters and renderer reject with named reasons).
struct FirmYearRecord {
    std::string firm_id;
    int fiscal_year = 0;
    int industry_code = 0;
    Date fiscal_year_end;
    double year_end_price = std::numeric_limits<double>::quiet_NaN();
    double market_equity = std::numeric_limits<double>::quiet_NaN();

    std::vector<double> bs_t, bs_t1;        // balance sheet, years t and t-1
    std::vector<double> is_t, is_t1, is_t2; // income statement, years t, t-1, t-2

    FirmYear key() const { return {firm_id, fiscal_year}; }

    double bs_item(const std::string& id, int lag = 0) const;
    double is_item(const std::string& id, int lag = 0) const;

    double total_assets(int lag = 0) const { return bs_item("at", lag); }
    double total_debt() const { return bs_item("dlc") + bs_item("dltt"); }
    double book_equity() const { return bs_item("seq"); }
    double eps_basic(int lag = 0) const { return is_item("epspx", lag); }
};

struct AnalystForecastRecord {
    std::string firm_id;
    int fiscal_year_forecasted = 0;
    std::string analyst_id;
    double forecast_eps = 0.0;
    Date issue_date;
    Date prior_earnings_release_date;
};

struct MonthlyReturnRow {
    std::string firm_id;
    MonthKey month;
    double ret = 0.0;            // decimal
    double market_equity = 0.0;  // currency millions
};

struct FactorRow {
    MonthKey month;
    double mktrf = 0.0, smb = 0.0, hml = 0.0, rmw = 0.0, cma = 0.0, mom = 0.0, rf = 0.0;
};

/// Full fundamentals panel: rows keyed by firm then year, plus the records
/// assembled from consecutive rows (years with both lags available).
class Panel {
public:
    static Panel load(const std::string& fundamentals_csv_path);

    const std::map<std::string, std::map<int, FirmYearRow>>& rows() const { return rows_; }
    const std::vector<FirmYearRecord>& records() const { return records_; }

    const FirmYearRow* row(const std::string& firm, int year) const;
    const FirmYearRecord* record(const FirmYear& key) const;

    /// EPS (basic, excl. extraordinary items) for any row year, if present.
    std::optional<double> eps(const std::string& firm, int year) const;

    void add_row(FirmYearRow row);       // used by tests/generators
    void assemble_records();             // rebuild records from rows

private:
    std::map<std::string, std::map<int, FirmYearRow>> rows_;
    std::vector<FirmYearRecord> records_;
    std::map<FirmYear, size_t> record_index_;
};

std::vector<AnalystForecastRecord> load_analyst_forecasts(const std::string& path);
std::vector<MonthlyReturnRow> load_monthly_returns(const std::string& path);
std::vector<FactorRow> load_factors(const std::string& path);

/// Column order of the fundamentals CSV (identifiers, then template ids).
std::vector<std::string> fundamentals_csv_header();

}  // namespace fsa
