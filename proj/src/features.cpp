#include "fsa/features.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fsa {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDenominatorFloor = 1e-12;

int max_available_lag(const std::string& stmt) { return stmt == "bs" ? 1 : 2; }

double term_value(const FeatureTerm& term, const FirmYearRecord& rec, int shift) {
    const int lag = term.lag + shift;
    if (lag > max_available_lag(term.stmt)) return kNaN;
    const double v = term.stmt == "bs" ? rec.bs_item(term.item, lag) : rec.is_item(term.item, lag);
    return term.coef * v;
}

double expr_value(const FeatureDef& def, const FirmYearRecord& rec, int shift) {
    double num = 0.0;
    for (const auto& t : def.numerator) {
        const double v = term_value(t, rec, shift);
        if (std::isnan(v)) return kNaN;
        num += v;
    }
    if (def.denominator.empty()) return num;
    double den = 0.0;
    for (const auto& t : def.denominator) {
        const double v = term_value(t, rec, shift);
        if (std::isnan(v)) return kNaN;
        den += v;
    }
    if (std::abs(den) < kDenominatorFloor) return kNaN;
    return num / den;
}

}  // namespace

double evaluate_feature(const FeatureDef& def, const FirmYearRecord& rec) {
    if (def.op == "level") return expr_value(def, rec, 0);
    const double f0 = expr_value(def, rec, 0);
    const double f1 = expr_value(def, rec, 1);
    if (std::isnan(f0) || std::isnan(f1)) return kNaN;
    if (def.op == "change") return f0 - f1;
    // pct_change
    if (std::abs(f1) < kDenominatorFloor) return kNaN;
    return (f0 - f1) / std::abs(f1);
}

FeatureRecipe FeatureRecipe::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open predictor recipe: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(ss.str());
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

FeatureRecipe FeatureRecipe::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("recipe is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
        throw Error("recipe must be an object with a 'features' array");
    }
    FeatureRecipe recipe;
    auto parse_terms = [](const json& arr) {
        std::vector<FeatureTerm> terms;
        for (const auto& t : arr) {
            FeatureTerm term;
            term.stmt = t.at("stmt").get<std::string>();
            term.item = t.at("item").get<std::string>();
            term.lag = t.value("lag", 0);
            term.coef = t.value("coef", 1.0);
            terms.push_back(std::move(term));
        }
        return terms;
    };
    for (const auto& f : j["features"]) {
        FeatureDef def;
        def.name = f.at("name").get<std::string>();
        def.numerator = parse_terms(f.at("numerator"));
        if (f.contains("denominator")) def.denominator = parse_terms(f["denominator"]);
        def.op = f.value("op", "level");
        recipe.features_.push_back(std::move(def));
    }
    recipe.validate();
    return recipe;
}

void FeatureRecipe::validate() const {
    std::set<std::string> seen;
    for (const auto& def : features_) {
        if (def.name.empty()) throw Error("recipe feature with empty name");
        if (!seen.insert(def.name).second) throw Error("duplicate recipe feature: " + def.name);
        if (def.op != "level" && def.op != "change" && def.op != "pct_change") {
            throw Error("feature " + def.name + ": unknown op '" + def.op + "'");
        }
        if (def.numerator.empty()) throw Error("feature " + def.name + ": empty numerator");
        const int shift = def.op == "level" ? 0 : 1;
        auto check_terms = [&](const std::vector<FeatureTerm>& terms) {
            for (const auto& t : terms) {
                if (t.stmt != "bs" && t.stmt != "is") {
                    throw Error("feature " + def.name + ": stmt must be 'bs' or 'is'");
                }
                const bool known = t.stmt == "bs" ? is_balance_sheet_item(t.item)
                                                  : is_income_statement_item(t.item);
                if (!known) throw Error("feature " + def.name + ": unknown item " + t.item);
                if (t.lag < 0 || t.lag + shift > max_available_lag(t.stmt)) {
                    throw Error(strf("feature %s: item %s lag %d not available for op %s",
                                     def.name.c_str(), t.item.c_str(), t.lag, def.op.c_str()));
                }
            }
        };
        check_terms(def.numerator);
        check_terms(def.denominator);
    }
}

std::vector<std::string> FeatureRecipe::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

std::vector<double> build_op_features(const FirmYearRecord& rec, const FeatureRecipe& recipe) {
    std::vector<double> out;
    out.reserve(recipe.size());
    for (const auto& def : recipe.features()) out.push_back(evaluate_feature(def, rec));
    return out;
}

size_t fs_feature_count() {
    return balance_sheet_items().size() + income_statement_items().size() + 4;
}

std::vector<std::string> fs_feature_names() {
    std::vector<std::string> names;
    for (const auto& item : balance_sheet_items()) names.push_back(std::string(item.id) + "_at");
    for (const auto& item : income_statement_items())
        names.push_back(std::string(item.id) + "_sale");
    names.push_back("chg_revenue");
    names.push_back("chg_lag_revenue");
    names.push_back("chg_total_assets");
    names.push_back("revenue_to_assets");
    return names;
}

std::vector<double> build_fs_features(const FirmYearRecord& rec) {
    std::vector<double> out;
    out.reserve(fs_feature_count());
    const double at = rec.total_assets();
    const double sale = rec.is_item("sale");
    const bool at_ok = std::abs(at) > kDenominatorFloor && !std::isnan(at);
    const bool sale_ok = std::abs(sale) > kDenominatorFloor && !std::isnan(sale);
    for (size_t i = 0; i < rec.bs_t.size(); ++i) {
        out.push_back(at_ok ? rec.bs_t[i] / at : kNaN);
    }
    for (size_t i = 0; i < rec.is_t.size(); ++i) {
        out.push_back(sale_ok ? rec.is_t[i] / sale : kNaN);
    }
    auto pct_change = [](double now, double before) {
        if (std::isnan(now) || std::isnan(before) || std::abs(before) < kDenominatorFloor)
            return kNaN;
        return (now - before) / std::abs(before);
    };
    out.push_back(pct_change(rec.is_item("sale", 0), rec.is_item("sale", 1)));
    out.push_back(pct_change(rec.is_item("sale", 1), rec.is_item("sale", 2)));
    out.push_back(pct_change(rec.bs_item("at", 0), rec.bs_item("at", 1)));
    out.push_back(at_ok && !std::isnan(sale) ? sale / at : kNaN);
    return out;
}

namespace {

FeatureMatrix assemble(const std::vector<FirmYearRecord>& records,
                       std::vector<std::string> names,
                       const std::function<std::vector<double>(const FirmYearRecord&)>& build) {
    FeatureMatrix m;
    m.names = std::move(names);
    m.values.resize(static_cast<Eigen::Index>(records.size()),
                    static_cast<Eigen::Index>(m.names.size()));
    for (size_t r = 0; r < records.size(); ++r) {
        m.keys.push_back(records[r].key());
        m.years.push_back(records[r].fiscal_year);
        m.industries.push_back(records[r].industry_code);
        const auto row = build(records[r]);
        if (row.size() != m.names.size()) throw Error("feature row width mismatch");
        for (size_t c = 0; c < row.size(); ++c) {
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        }
    }
    return m;
}

}  // namespace

FeatureMatrix assemble_op_matrix(const std::vector<FirmYearRecord>& records,
                                 const FeatureRecipe& recipe) {
    return assemble(records, recipe.names(),
                    [&recipe](const FirmYearRecord& r) { return build_op_features(r, recipe); });
}

FeatureMatrix assemble_fs_matrix(const std::vector<FirmYearRecord>& records) {
    return assemble(records, fs_feature_names(),
                    [](const FirmYearRecord& r) { return build_fs_features(r); });
}

void impute_year_industry(FeatureMatrix& m) {
    const Eigen::Index rows = m.values.rows();
    const Eigen::Index cols = m.values.cols();
    for (Eigen::Index c = 0; c < cols; ++c) {
        // group sums keyed by (year, industry) and by year
        std::map<std::pair<int, int>, std::pair<double, int>> yi;
        std::map<int, std::pair<double, int>> y;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double v = m.values(r, c);
            if (std::isnan(v)) continue;
            auto& a = yi[{m.years[r], m.industries[r]}];
            a.first += v;
            a.second += 1;
            auto& b = y[m.years[r]];
            b.first += v;
            b.second += 1;
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            double& v = m.values(r, c);
            if (!std::isnan(v)) continue;
            auto it = yi.find({m.years[r], m.industries[r]});
            if (it != yi.end() && it->second.second > 0) {
                v = it->second.first / it->second.second;
                continue;
            }
            auto it2 = y.find(m.years[r]);
            if (it2 != y.end() && it2->second.second > 0) {
                v = it2->second.first / it2->second.second;
            }
        }
    }
}

void Standardizer::fit(const Eigen::MatrixXd& train) {
    const Eigen::Index cols = train.cols();
    mean_.resize(cols);
    stdev_.resize(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        double sum = 0.0;
        int n = 0;
        for (Eigen::Index r = 0; r < train.rows(); ++r) {
            const double v = train(r, c);
            if (std::isnan(v)) continue;
            sum += v;
            ++n;
        }
        const double mean = n > 0 ? sum / n : 0.0;
        double ss = 0.0;
        for (Eigen::Index r = 0; r < train.rows(); ++r) {
            const double v = train(r, c);
            if (std::isnan(v)) continue;
            ss += (v - mean) * (v - mean);
        }
        const double stdev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        mean_(c) = mean;
        stdev_(c) = std::max(stdev, 1e-8);
    }
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean_.size()) throw Error("Standardizer: width mismatch");
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double v = x(r, c);
            out(r, c) = std::isnan(v) ? 0.0 : (v - mean_(c)) / stdev_(c);
        }
    }
    return out;
}

}  // namespace fsa
