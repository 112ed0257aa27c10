#include "fsa/statement_template.hpp"

#include <map>

#include "fsa/common.hpp"

namespace fsa {

const std::vector<LineItem>& balance_sheet_items() {
    static const std::vector<LineItem> items = {
        {"che", "Cash and Short-Term Investments", false},
        {"rect", "Receivables", false},
        {"invt", "Inventories", false},
        {"aco", "Other current assets", false},
        {"act", "Current Assets", true},
        {"ppent", "Property, Plant, and Equipment (Net)", false},
        {"ivaeq", "Investment and Advances (equity)", false},
        {"ivao", "Other investments", false},
        {"intan", "Intangible assets", false},
        {"ao", "Other assets", false},
        {"at", "Total Asset", true},
        {"dlc", "Debt in current liabilities", false},
        {"ap", "Account payable", false},
        {"txp", "Income taxes payable", false},
        {"lco", "Other current liabilities", false},
        {"lct", "Current liabilities", true},
        {"dltt", "Long-term debt", false},
        {"txditc", "Deferred taxes and investment tax credit", false},
        {"lo", "Other liabilities", false},
        {"lt", "Total Liabilities", true},
        {"pstk", "Preferred stock", false},
        {"ceq", "Common stock", false},
        {"seq", "Stockholders' equity total", true},
        {"mib", "Noncontrolling interest", false},
        {"teq", "Shareholders' Equity", true},
        {"lse", "Total Liabilities and Shareholders' Equity", true},
    };
    return items;
}

const std::vector<LineItem>& income_statement_items() {
    static const std::vector<LineItem> items = {
        {"sale", "Sales (net)", true},
        {"cogs", "Cost of Goods Sold", true},
        {"gp", "Gross Profit", true},
        {"xsga", "Selling, General and Administrative Expenses", true},
        {"oibdp", "Operating Income Before Depreciation", true},
        {"dp", "Depreciation and Amortization", true},
        {"oiadp", "Operating Income After Depreciation", true},
        {"xint", "Interest and related expense", false},
        {"nopio", "Nonoperating income (excluding interest income)", false},
        {"idit", "Interest income", false},
        {"spi", "Special items", false},
        {"pi", "Pretax income", true},
        {"txc", "Income taxes (current)", false},
        {"txdi", "Income taxes (deferred)", false},
        {"txo", "Income taxes (other)", false},
        {"txt", "Income Taxes - Total", false},
        {"ibmii", "Income before extraordinary items and noncontrolling interest", false},
        {"mii", "Noncontrolling interest", false},
        {"ib", "Income before extraordinary items", true},
        {"dvp", "Dividends", false},
        {"ibcom", "Income before extraordinary items for common stocks", false},
        {"cstke", "Common Stock Equivalents - Dollar Savings", false},
        {"ibadj", "Income Before Extraordinary Items - Adjusted for Common Stock Equivalents",
         false},
        {"xido", "Extraordinary Items and Discontinued Operations", false},
        {"ni", "Net Income (Loss)", true},
        {"epspx", "Earnings per Share - Basic Excluding Extraordinary Items", true},
        {"epsfx", "Earnings per Share - Diluted Excluding Extraordinary Items", false},
    };
    return items;
}

namespace {

std::map<std::string, size_t> make_index(const std::vector<LineItem>& items) {
    std::map<std::string, size_t> m;
    for (size_t i = 0; i < items.size(); ++i) m[items[i].id] = i;
    return m;
}

const std::map<std::string, size_t>& bs_index() {
    static const auto m = make_index(balance_sheet_items());
    return m;
}

const std::map<std::string, size_t>& is_index() {
    static const auto m = make_index(income_statement_items());
    return m;
}

}  // namespace

size_t balance_sheet_index(const std::string& id) {
    auto it = bs_index().find(id);
    if (it == bs_index().end()) throw Error("unknown balance sheet item: " + id);
    return it->second;
}

size_t income_statement_index(const std::string& id) {
    auto it = is_index().find(id);
    if (it == is_index().end()) throw Error("unknown income statement item: " + id);
    return it->second;
}

bool is_balance_sheet_item(const std::string& id) { return bs_index().count(id) > 0; }
bool is_income_statement_item(const std::string& id) { return is_index().count(id) > 0; }

}  // namespace fsa
