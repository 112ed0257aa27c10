#include "fsa/dates.hpp"

#include <algorithm>
#include <cstdio>

namespace fsa {

Date parse_date(const std::string& s) {
    Date d;
    char extra = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c", &d.year, &d.month, &d.day, &extra) != 3 ||
        d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        throw Error("invalid date: '" + s + "' (expected YYYY-MM-DD)");
    }
    return d;
}

std::string format_date(const Date& d) {
    return strf("%04d-%02d-%02d", d.year, d.month, d.day);
}

Date add_months(const Date& d, int months) {
    int m0 = d.year * 12 + (d.month - 1) + months;
    Date out;
    out.year = m0 / 12;
    out.month = m0 % 12 + 1;
    if (out.month < 1) {  // negative wrap
        out.month += 12;
        out.year -= 1;
    }
    out.day = std::min(d.day, days_in_month(out.year, out.month));
    return out;
}

MonthKey parse_month(const std::string& s) {
    int y = 0, m = 0;
    char extra = 0;
    if (std::sscanf(s.c_str(), "%d-%d%c", &y, &m, &extra) != 2 || m < 1 || m > 12) {
        throw Error("invalid month: '" + s + "' (expected YYYY-MM)");
    }
    return MonthKey(y, m);
}

std::string format_month(MonthKey m) {
    return strf("%04d-%02d", m.year(), m.month());
}

}  // namespace fsa
