#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "fsa/records.hpp"

namespace fsa {

/// The anonymized two-statement rendering. Labels and layout are frozen; the
/// only year tokens are "t", "t-1", "t-2".
struct StandardizedStatements {
    std::vector<std::tuple<std::string, double, double>> balance_sheet;           // label, t, t-1
    std::vector<std::tuple<std::string, double, double, double>> income_statement;// label, t, t-1, t-2
    std::string rendered_text;
};

/// Amount formatting: up to three decimals, trailing zeros trimmed, at least
/// one decimal digit, "0.0" for zero (never "-0.0").
std::string format_amount(double v);

/// Renders the record into the fixed template. Throws Error naming the item
/// if a template slot is still missing (NaN) after zero-fill.
StandardizedStatements standardize(const FirmYearRecord& record);

/// Names/tickers that must never appear in rendered text or prompts.
class AnonymityLexicon {
public:
    AnonymityLexicon() = default;
    explicit AnonymityLexicon(const std::vector<std::string>& entries);
    static AnonymityLexicon load(const std::string& path);  // one entry per line

    void add(const std::string& entry);
    bool empty() const { return entries_.empty(); }

    /// True when the text contains this entry as a word-bounded,
    /// case-insensitive phrase (punctuation treated as separators).
    bool hit(const std::string& text_lower_normalized, std::string* which = nullptr) const;

    const std::vector<std::string>& entries() const { return entries_; }

private:
    std::vector<std::string> entries_;  // normalized: lowercase, punctuation -> space
};

/// True iff the text contains no lexicon entry and no absolute-year token
/// (19xx/20xx standing alone; digits inside decimal amounts do not count).
bool verify_anonymity(const std::string& text, const AnonymityLexicon& lexicon);

}  // namespace fsa
