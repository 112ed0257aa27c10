#pragma once

#include <compare>
#include <string>

#include "fsa/common.hpp"

namespace fsa {

/// Plain calendar date. Only needs ISO parsing, comparisons and month math.
struct Date {
    int year = 0;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    friend bool operator==(const Date&, const Date&) = default;
    friend std::strong_ordering operator<=>(const Date&, const Date&) = default;
};

inline bool is_leap(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

inline int days_in_month(int year, int month) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return d[month - 1];
}

/// Parses "YYYY-MM-DD".
Date parse_date(const std::string& s);

std::string format_date(const Date& d);

/// Adds calendar months, clamping the day to the target month's length.
Date add_months(const Date& d, int months);

/// Month key = year * 12 + (month - 1); convenient for contiguous month math.
struct MonthKey {
    int v = 0;

    MonthKey() = default;
    MonthKey(int year, int month) : v(year * 12 + month - 1) {}

    int year() const { return v / 12; }
    int month() const { return v % 12 + 1; }
    MonthKey next() const { MonthKey m; m.v = v + 1; return m; }

    friend bool operator==(const MonthKey&, const MonthKey&) = default;
    friend auto operator<=>(const MonthKey&, const MonthKey&) = default;
};

/// Parses "YYYY-MM".
MonthKey parse_month(const std::string& s);

std::string format_month(MonthKey m);

}  // namespace fsa
