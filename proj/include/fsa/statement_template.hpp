#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fsa {

/// One line of the fixed two-statement template. `id` is the canonical CSV
/// column / recipe identifier; `label` is the rendered text. Items flagged
/// required must be present in the input (they carry subtotals, identity
/// checks, or EPS); everything else is zero-filled when missing.
struct LineItem {
    const char* id;
    const char* label;
    bool required;
};

/// Balance sheet template, two years rendered (t, t-1).
const std::vector<LineItem>& balance_sheet_items();

/// Income statement template, three years rendered (t, t-1, t-2).
const std::vector<LineItem>& income_statement_items();

/// Index of `id` within its statement template; throws if unknown.
size_t balance_sheet_index(const std::string& id);
size_t income_statement_index(const std::string& id);

bool is_balance_sheet_item(const std::string& id);
bool is_income_statement_item(const std::string& id);

}  // namespace fsa
