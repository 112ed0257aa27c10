#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsa/records.hpp"

namespace fsa {

enum class FilterReason {
    MissingField,
    AssetsBelowMinimum,
    PriceBelowMinimum,
    NonCalendarYearEnd,
    BalanceIdentity,
    IncomeRollup,
};

std::string to_string(FilterReason r);

struct FilterRejection {
    FirmYear key;
    FilterReason reason;
    std::string detail;  // e.g. name of the missing item
};

struct FilterOutcome {
    std::vector<FirmYearRecord> kept;
    std::vector<FilterRejection> rejected;
};

/// Identity tolerance on statement roll-ups, in currency millions.
inline constexpr double kIdentityTolerance = 1e-3;

/// Sample filters: non-missing assets, assets > $1m, price > $1/share,
/// December 31 fiscal year end, and the statement identities within
/// tolerance for every provided year. Rejections are per record, never a
/// batch abort.
FilterOutcome apply_sample_filters(const std::vector<FirmYearRecord>& records);

/// Identity checks in isolation (also used by the renderer round-trip suite).
bool balance_identity_holds(const FirmYearRecord& rec, double tol = kIdentityTolerance);
bool income_rollup_holds(const FirmYearRecord& rec, double tol = kIdentityTolerance);

struct Target {
    FirmYear key;
    int increase = 0;  // 1 iff EPS(t+1) > EPS(t)
};

/// Next-year EPS direction for every firm-year whose successor year exists.
/// Ties and decreases map to 0; missing t+1 EPS means no target.
std::vector<Target> build_target(const Panel& panel);

std::map<FirmYear, int> target_map(const std::vector<Target>& targets);

struct FirmCharacteristics {
    double size = std::numeric_limits<double>::quiet_NaN();      // log total assets
    double btom = std::numeric_limits<double>::quiet_NaN();      // book / market
    double leverage = std::numeric_limits<double>::quiet_NaN();  // total debt / assets
    double earnings_volatility = std::numeric_limits<double>::quiet_NaN();
    double ppe = std::numeric_limits<double>::quiet_NaN();       // net PP&E / assets
    int loss = 0;
    bool usable = true;  // false when ratios cannot be formed (assets <= 0)
};

/// Table-style firm characteristics, winsorized at the 1st/99th percentiles
/// over the pooled sample (continuous fields only). Earnings volatility
/// needs at least 3 of the past 5 years of income; otherwise it stays NaN
/// for downstream imputation.
std::map<FirmYear, FirmCharacteristics> compute_characteristics(const Panel& panel);

/// Nearest-rank percentile of a sample (p in [0,1]); used for winsorization
/// and quartile cuts. Ignores NaNs.
double percentile_nearest_rank(std::vector<double> values, double p);

/// Clips values outside the [lo_p, hi_p] nearest-rank percentiles. NaNs pass
/// through untouched.
void winsorize(std::vector<double>& values, double lo_p = 0.01, double hi_p = 0.99);

}  // namespace fsa
