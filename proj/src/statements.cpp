#include "fsa/statements.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

namespace fsa {

std::string format_amount(double v) {
    if (std::isnan(v)) throw Error("format_amount: NaN amount");
    if (v == 0.0) return "0.0";  // covers -0.0 as well
    std::string s = strf("%.3f", v);
    // trim trailing zeros but keep one decimal digit
    size_t dot = s.find('.');
    size_t last = s.size();
    while (last - 1 > dot + 1 && s[last - 1] == '0') --last;
    s.erase(last);
    if (s == "-0.0" || s == "0.000" || s == "-0.000") return "0.0";
    return s;
}

namespace {

constexpr const char* kSeparator = "  ";

void render_row(std::string& out, const std::string& label,
                std::initializer_list<double> amounts, const char* item_id) {
    out += label;
    for (double a : amounts) {
        if (std::isnan(a)) {
            throw Error(std::string("cannot render statement: item '") + item_id +
                        "' is missing and not zero-fillable");
        }
        out += kSeparator;
        out += format_amount(a);
    }
    out += '\n';
}

}  // namespace

StandardizedStatements standardize(const FirmYearRecord& record) {
    StandardizedStatements s;
    std::string& text = s.rendered_text;

    text += "Balance Sheet\n";
    text += "Account Items  t  t-1\n";
    const auto& bs = balance_sheet_items();
    for (size_t i = 0; i < bs.size(); ++i) {
        render_row(text, bs[i].label, {record.bs_t[i], record.bs_t1[i]}, bs[i].id);
        s.balance_sheet.emplace_back(bs[i].label, record.bs_t[i], record.bs_t1[i]);
    }

    text += "\nIncome Statement\n";
    text += "Account Items  t  t-1  t-2\n";
    const auto& is = income_statement_items();
    for (size_t i = 0; i < is.size(); ++i) {
        render_row(text, is[i].label, {record.is_t[i], record.is_t1[i], record.is_t2[i]},
                   is[i].id);
        s.income_statement.emplace_back(is[i].label, record.is_t[i], record.is_t1[i],
                                        record.is_t2[i]);
    }
    return s;
}

namespace {

std::string normalize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool last_space = true;
    for (char raw : s) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
            last_space = false;
        } else if (!last_space) {
            out += ' ';
            last_space = true;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)); }

}  // namespace

AnonymityLexicon::AnonymityLexicon(const std::vector<std::string>& entries) {
    for (const auto& e : entries) add(e);
}

AnonymityLexicon AnonymityLexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon file: " + path);
    AnonymityLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        lex.add(line);
    }
    return lex;
}

void AnonymityLexicon::add(const std::string& entry) {
    std::string norm = normalize(entry);
    if (!norm.empty()) entries_.push_back(std::move(norm));
}

bool AnonymityLexicon::hit(const std::string& text, std::string* which) const {
    for (const auto& entry : entries_) {
        size_t pos = 0;
        while ((pos = text.find(entry, pos)) != std::string::npos) {
            const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
            const size_t end = pos + entry.size();
            const bool right_ok = end == text.size() || !is_word_char(text[end]);
            if (left_ok && right_ok) {
                if (which) *which = entry;
                return true;
            }
            ++pos;
        }
    }
    return false;
}

bool verify_anonymity(const std::string& text, const AnonymityLexicon& lexicon) {
    // Absolute-year scan: a 4-digit run starting 19/20, not embedded in a
    // longer number. A following '.' or preceding '.'/digit marks a decimal
    // amount (e.g. "2030.154"), which is not a year token.
    for (size_t i = 0; i + 3 < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        const bool prefix_19 = text[i] == '1' && text[i + 1] == '9';
        const bool prefix_20 = text[i] == '2' && text[i + 1] == '0';
        if (!prefix_19 && !prefix_20) continue;
        if (!std::isdigit(static_cast<unsigned char>(text[i + 2])) ||
            !std::isdigit(static_cast<unsigned char>(text[i + 3]))) {
            continue;
        }
        if (i > 0) {
            const char before = text[i - 1];
            if (std::isdigit(static_cast<unsigned char>(before)) || before == '.') continue;
        }
        if (i + 4 < text.size()) {
            const char after = text[i + 4];
            if (std::isdigit(static_cast<unsigned char>(after)) || after == '.') continue;
        }
        return false;
    }
    if (!lexicon.empty() && lexicon.hit(normalize(text))) return false;
    return true;
}

}  // namespace fsa
