#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsa/records.hpp"

namespace fsa {

/// One additive term of a feature expression: coef * item(stmt)[lag].
struct FeatureTerm {
    std::string stmt;  // "bs" | "is"
    std::string item;  // canonical template id
    int lag = 0;
    double coef = 1.0;
};

/// A named feature: f = numerator / denominator evaluated on the record,
/// optionally differenced against the same expression shifted one year back.
///   op = "level":      f(0)
///   op = "change":     f(0) - f(1)
///   op = "pct_change": (f(0) - f(1)) / |f(1)|
struct FeatureDef {
    std::string name;
    std::vector<FeatureTerm> numerator;
    std::vector<FeatureTerm> denominator;  // empty means 1
    std::string op = "level";
};

/// Predictor recipe loaded from JSON; the file, not code, defines the set.
class FeatureRecipe {
public:
    static FeatureRecipe load(const std::string& path);
    static FeatureRecipe from_json(const std::string& json_text);

    const std::vector<FeatureDef>& features() const { return features_; }
    size_t size() const { return features_.size(); }
    std::vector<std::string> names() const;

private:
    void validate() const;
    std::vector<FeatureDef> features_;
};

/// NaN when undefined (missing item, zero denominator, unavailable lag).
double evaluate_feature(const FeatureDef& def, const FirmYearRecord& rec);

std::vector<double> build_op_features(const FirmYearRecord& rec, const FeatureRecipe& recipe);

/// Financial-statement feature set: every balance sheet item / total assets,
/// every income statement item / sales, plus revenue change, lagged revenue
/// change, total asset change, and revenue over assets.
std::vector<double> build_fs_features(const FirmYearRecord& rec);
size_t fs_feature_count();
std::vector<std::string> fs_feature_names();

/// Feature rows aligned with firm-year keys; NaN marks missing.
struct FeatureMatrix {
    std::vector<FirmYear> keys;
    std::vector<int> years;
    std::vector<int> industries;
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // rows x features
};

FeatureMatrix assemble_op_matrix(const std::vector<FirmYearRecord>& records,
                                 const FeatureRecipe& recipe);
FeatureMatrix assemble_fs_matrix(const std::vector<FirmYearRecord>& records);

/// Replaces NaNs column-wise with the year-industry mean, falling back to the
/// year mean. Cells with no donor stay NaN (standardization maps them to the
/// training mean).
void impute_year_industry(FeatureMatrix& m);

/// Per-feature affine map fitted on training rows: z = (x - mean) / stdev,
/// stdev floored at 1e-8. NaNs transform to exactly 0 (the training mean).
class Standardizer {
public:
    void fit(const Eigen::MatrixXd& train);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stdev() const { return stdev_; }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd stdev_;
};

}  // namespace fsa
