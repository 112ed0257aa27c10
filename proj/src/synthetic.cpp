#include "fsa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "fsa/csv.hpp"
#include "fsa/records.hpp"
#include "fsa/rng.hpp"

namespace fsa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTaxRate = 0.30;

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

Date add_days(Date d, int days) {
    for (int i = 0; i < days; ++i) {
        if (d.day < days_in_month(d.year, d.month)) {
            ++d.day;
        } else {
            d.day = 1;
            if (d.month == 12) {
                d.month = 1;
                ++d.year;
            } else {
                ++d.month;
            }
        }
    }
    return d;
}

struct FirmState {
    std::string id;
    int industry;
    double shares;
    double turnover;
    double beta;
    double sale;
    double margin;  // ib / sale
    double signal;  // observable AR(1) signal (embedded in the SG&A ratio)
};

struct YearRow {
    int year;
    std::map<std::string, double> bs;
    std::map<std::string, double> is;
    double price;
    double market_equity;
};

// Leaves are rounded to the rendered precision first; every subtotal is then
// an exact sum of stored values, so the statement identities survive the CSV
// round trip within far less than the 1e-3 tolerance.
YearRow build_year(const FirmState& f, int year, double sale_in, double ib_target, double signal,
                   double price, Rng& rng) {
    YearRow row;
    row.year = year;

    auto& is = row.is;
    const double sale = round3(sale_in);
    is["sale"] = sale;
    is["cogs"] = round3(sale * (0.55 + 0.02 * rng.normal()));
    is["gp"] = is["sale"] - is["cogs"];
    is["xsga"] = round3(std::max(0.01 * sale, sale * (0.24 - 0.06 * signal)));
    is["oibdp"] = is["gp"] - is["xsga"];
    is["dp"] = round3(0.05 * sale * (1.0 + 0.1 * rng.normal()));
    is["oiadp"] = is["oibdp"] - is["dp"];
    is["xint"] = round3(0.02 * sale);
    is["idit"] = round3(0.005 * sale);
    is["spi"] = 0.0;
    // nonoperating income absorbs the slack between the operating lines and
    // the pretax income implied by the target earnings
    const double pi_target = ib_target / (1.0 - kTaxRate);
    is["nopio"] =
        round3(pi_target - (is["oiadp"] - is["xint"] + is["idit"] + is["spi"]));
    is["pi"] = is["oiadp"] - is["xint"] + is["nopio"] + is["idit"] + is["spi"];
    is["txc"] = round3(kTaxRate * is["pi"] * 0.8);
    is["txdi"] = round3(kTaxRate * is["pi"] * 0.2);
    is["txo"] = 0.0;
    is["txt"] = is["txc"] + is["txdi"] + is["txo"];
    is["ibmii"] = is["pi"] - is["txt"];
    is["mii"] = 0.0;
    is["ib"] = is["ibmii"] - is["mii"];
    is["dvp"] = 0.0;
    is["ibcom"] = is["ib"];
    is["cstke"] = 0.0;
    is["ibadj"] = is["ib"];
    is["xido"] = 0.0;
    is["ni"] = is["ib"];
    is["epspx"] = round3(is["ib"] / f.shares);
    is["epsfx"] = is["epspx"];

    auto& bs = row.bs;
    const double at_target = std::max(2.5, sale / f.turnover);
    double che = 0.08 * at_target * (1.0 + 0.2 * rng.uniform());
    double rect = 0.16 * at_target * (1.0 + 0.2 * rng.uniform());
    double invt = 0.18 * at_target * (1.0 + 0.2 * rng.uniform());
    double aco = 0.03 * at_target;
    double ppent = 0.30 * at_target * (1.0 + 0.15 * rng.uniform());
    double ivaeq = 0.02 * at_target;
    double ivao = 0.02 * at_target;
    double intan = 0.08 * at_target * (1.0 + 0.3 * rng.uniform());
    const double partial = che + rect + invt + aco + ppent + ivaeq + ivao + intan;
    double ao = at_target - partial;
    if (ao < 0.02 * at_target) {
        const double scale = (0.98 * at_target) / partial;
        che *= scale;
        rect *= scale;
        invt *= scale;
        aco *= scale;
        ppent *= scale;
        ivaeq *= scale;
        ivao *= scale;
        intan *= scale;
        ao = 0.02 * at_target;
    }
    bs["che"] = round3(che);
    bs["rect"] = round3(rect);
    bs["invt"] = round3(invt);
    bs["aco"] = round3(aco);
    bs["act"] = bs["che"] + bs["rect"] + bs["invt"] + bs["aco"];
    bs["ppent"] = round3(ppent);
    bs["ivaeq"] = round3(ivaeq);
    bs["ivao"] = round3(ivao);
    bs["intan"] = round3(intan);
    bs["ao"] = round3(ao);
    bs["at"] = bs["act"] + bs["ppent"] + bs["ivaeq"] + bs["ivao"] + bs["intan"] + bs["ao"];

    const double at = bs["at"];
    bs["dlc"] = round3(0.05 * at * (1.0 + 0.3 * rng.uniform()));
    bs["ap"] = round3(0.09 * at * (1.0 + 0.3 * rng.uniform()));
    bs["txp"] = round3(0.01 * at);
    bs["lco"] = round3(0.06 * at);
    bs["lct"] = bs["dlc"] + bs["ap"] + bs["txp"] + bs["lco"];
    bs["dltt"] = round3(0.18 * at * (1.0 + 0.4 * rng.uniform()));
    bs["txditc"] = round3(0.02 * at);
    bs["lo"] = round3(0.04 * at);
    bs["lt"] = bs["lct"] + bs["dltt"] + bs["txditc"] + bs["lo"];
    bs["pstk"] = 0.0;
    bs["mib"] = 0.0;
    bs["seq"] = at - bs["lt"];
    bs["ceq"] = bs["seq"];
    bs["teq"] = bs["seq"] + bs["mib"];
    bs["lse"] = bs["lt"] + bs["teq"];

    row.price = std::round(price * 100.0) / 100.0;
    row.market_equity = round3(row.price * f.shares);
    return row;
}

const char* kFamousNames =
    R"(["Tesla","Amazon","Apple","Microsoft","Facebook","Alphabet","Netflix","Nvidia","Walmart","Exxon Mobil"])";

}  // namespace

void generate_synthetic_universe(const SynthParams& p, const std::string& output_dir) {
    fs::create_directories(output_dir);
    Rng rng(p.seed);

    std::vector<FirmState> firms;
    for (int i = 0; i < p.n_firms; ++i) {
        FirmState f;
        f.id = strf("F%04d", i + 1);
        f.industry = 10 + i % p.n_industries;
        f.turnover = 1.1 + 0.5 * rng.uniform();
        f.beta = 0.6 + 0.8 * rng.uniform();
        f.sale = std::exp(rng.normal(4.0, 0.8)) + 5.0;
        f.shares = std::max(1.0, f.sale / (8.0 + 4.0 * rng.uniform()));
        f.margin = 0.06 + 0.02 * rng.normal();
        f.signal = rng.normal();
        firms.push_back(std::move(f));
    }

    const int n_years = p.last_year - p.first_year + 1;
    std::map<std::string, std::vector<YearRow>> rows_by_firm;
    std::map<std::string, std::map<int, double>> eps_by_firm_year;  // stored (rounded) EPS
    std::map<std::string, std::map<int, int>> target_by_firm_year;

    for (auto& f : firms) {
        std::vector<YearRow> rows;
        for (int k = 0; k < n_years; ++k) {
            const int year = p.first_year + k;
            const double ib = f.sale * f.margin;
            const double eps = ib / f.shares;
            const double price =
                std::max(2.0, 12.0 * std::max(eps, 0.15) * (1.0 + 0.1 * rng.normal()));
            rows.push_back(build_year(f, year, f.sale, ib, f.signal, price, rng));
            eps_by_firm_year[f.id][year] = rows.back().is.at("epspx");

            // advance: margin mean-reverts toward its mean and loads on the
            // observable signal; sales follow a noisy growth path
            const double m_bar = 0.06;
            const double next_margin = m_bar + (1.0 - p.mean_reversion) * (f.margin - m_bar) +
                                       p.signal_strength * 0.015 * f.signal +
                                       p.margin_noise * rng.normal();
            const double growth = p.sales_growth_mean + p.sales_growth_vol * rng.normal();
            f.sale = std::max(3.0, f.sale * (1.0 + growth));
            f.margin = std::clamp(next_margin, -0.25, 0.35);
            f.signal = 0.6 * f.signal + 0.8 * rng.normal();
        }
        for (int k = 0; k + 1 < n_years; ++k) {
            const int year = p.first_year + k;
            const double e0 = eps_by_firm_year[f.id][year];
            const double e1 = eps_by_firm_year[f.id][year + 1];
            target_by_firm_year[f.id][year] = e1 > e0 ? 1 : 0;
        }
        rows_by_firm[f.id] = std::move(rows);
    }

    // fundamentals.csv
    {
        CsvTable t(fundamentals_csv_header());
        for (const auto& f : firms) {
            for (const auto& row : rows_by_firm[f.id]) {
                std::vector<std::string> cells = {
                    f.id,
                    std::to_string(row.year),
                    std::to_string(f.industry),
                    strf("%04d-12-31", row.year),
                    csv_number(row.price),
                    csv_number(row.market_equity),
                };
                for (const auto& item : balance_sheet_items())
                    cells.push_back(csv_number(row.bs.at(item.id)));
                for (const auto& item : income_statement_items())
                    cells.push_back(csv_number(row.is.at(item.id)));
                t.append_row(cells);
            }
        }
        t.write_file((fs::path(output_dir) / "fundamentals.csv").string());
    }

    // analysts.csv: per horizon bucket, forecasts land strictly inside
    // (release + (h-1) months, release + h months]
    {
        CsvTable t({"firm_id", "fiscal_year_forecasted", "analyst_id", "forecast_eps",
                    "issue_date", "release_date"});
        for (const auto& f : firms) {
            for (int year = p.first_year; year < p.last_year; ++year) {
                const double truth = eps_by_firm_year[f.id].at(year + 1);
                const double base = eps_by_firm_year[f.id].at(year);
                const Date release{year + 1, 3, 25};
                const int n_analysts =
                    3 + static_cast<int>(rng.uniform_int(
                            static_cast<uint64_t>(std::max(1, p.max_analysts - 2))));
                for (int a = 0; a < n_analysts; ++a) {
                    const std::string analyst = strf("A%03d", 1 + (a * 17 + f.industry) % 200);
                    for (int horizon : {1, 3, 6}) {
                        // later forecasts see more interim information
                        const double staleness = horizon == 1 ? 1.0 : (horizon == 3 ? 0.8 : 0.6);
                        const double scale = std::max(0.05, std::abs(base));
                        const double eps_forecast =
                            truth + p.analyst_bias * scale +
                            p.analyst_noise * staleness * scale * rng.normal();
                        const Date window_start = add_months(release, horizon - 1);
                        const int offset =
                            horizon == 1 ? static_cast<int>(rng.uniform_int(28))
                                         : 1 + static_cast<int>(rng.uniform_int(27));
                        const Date issue = add_days(window_start, offset);
                        t.append_row({f.id, std::to_string(year + 1), analyst,
                                      csv_number(std::round(eps_forecast * 1000.0) / 1000.0),
                                      format_date(issue), format_date(release)});
                    }
                }
            }
        }
        t.write_file((fs::path(output_dir) / "analysts.csv").string());
    }

    // returns.csv + factors.csv
    {
        CsvTable rt({"firm_id", "month", "return", "market_equity"});
        CsvTable ft({"month", "mktrf", "smb", "hml", "rmw", "cma", "mom", "rf"});
        const MonthKey first(p.first_year, 1);
        const MonthKey last(p.last_year + 2, 12);

        std::map<int, FactorRow> factor_rows;
        for (MonthKey m = first; m <= last; m = m.next()) {
            FactorRow fr;
            fr.month = m;
            fr.mktrf = std::round((0.005 + p.market_vol * rng.normal()) * 1e6) / 1e6;
            fr.smb = std::round(0.02 * rng.normal() * 1e6) / 1e6;
            fr.hml = std::round(0.02 * rng.normal() * 1e6) / 1e6;
            fr.rmw = std::round(0.015 * rng.normal() * 1e6) / 1e6;
            fr.cma = std::round(0.015 * rng.normal() * 1e6) / 1e6;
            fr.mom = std::round(0.03 * rng.normal() * 1e6) / 1e6;
            fr.rf = 0.002;
            factor_rows[m.v] = fr;
            ft.append_row({format_month(m), csv_number(fr.mktrf), csv_number(fr.smb),
                           csv_number(fr.hml), csv_number(fr.rmw), csv_number(fr.cma),
                           csv_number(fr.mom), csv_number(fr.rf)});
        }

        for (const auto& f : firms) {
            double me = rows_by_firm[f.id].front().market_equity;
            for (MonthKey m = first; m <= last; m = m.next()) {
                // fiscal year whose holding window (Jul t+1 .. Jun t+2) covers m
                const int hold_year = (m.month() >= 7 ? m.year() : m.year() - 1) - 1;
                double drift = 0.0;
                auto firm_targets = target_by_firm_year.find(f.id);
                if (firm_targets != target_by_firm_year.end()) {
                    auto it = firm_targets->second.find(hold_year);
                    if (it != firm_targets->second.end()) {
                        drift = p.return_signal * (it->second == 1 ? 1.0 : -1.0);
                    }
                }
                const double r = std::round((drift + f.beta * factor_rows[m.v].mktrf +
                                             p.idio_vol * rng.normal()) *
                                            1e6) /
                                 1e6;
                me = std::max(0.5, round3(me * (1.0 + r)));
                rt.append_row({f.id, format_month(m), csv_number(r), csv_number(me)});
            }
        }
        rt.write_file((fs::path(output_dir) / "returns.csv").string());
        ft.write_file((fs::path(output_dir) / "factors.csv").string());
    }

    // scripted mock responses keyed by firm:year:kind
    if (p.emit_mock_responses) {
        json responses = json::object();
        for (const auto& f : firms) {
            for (int year = p.first_year; year <= p.last_year; ++year) {
                int target = static_cast<int>(rng.uniform_int(2));
                auto targets = target_by_firm_year.find(f.id);
                if (targets != target_by_firm_year.end() && targets->second.count(year)) {
                    target = targets->second.at(year);
                }
                const bool correct = rng.uniform() < p.mock_accuracy;
                const int direction = correct ? target : 1 - target;
                const double u = rng.uniform();
                const double c = p.mock_confidence_calibration;
                const double calibrated = correct ? 0.75 + 0.24 * u : 0.01 + 0.24 * u;
                const double confidence = std::clamp(c * calibrated + (1.0 - c) * u, 0.0, 1.0);
                const char* magnitudes[3] = {"large", "moderate", "small"};
                const char* magnitude = magnitudes[rng.uniform_int(3)];
                const double lp_base = c * (correct ? -0.05 - 0.1 * u : -0.8 - 0.5 * u) +
                                       (1.0 - c) * (-0.05 - 0.9 * u);

                json cot;
                cot["direction"] = direction == 1 ? "increase" : "decrease";
                cot["magnitude"] = magnitude;
                cot["confidence"] = std::round(confidence * 100.0) / 100.0;
                cot["trend analysis"] = strf(
                    "Revenue and operating income %s across the three years shown, with "
                    "working capital broadly stable.",
                    direction == 1 ? "trend upward" : "soften");
                cot["ratio analysis"] = strf(
                    "Operating margin = Operating Income After Depreciation / Sales (net); "
                    "the ratio %s year over year, while the current ratio stays near %.1f.",
                    direction == 1 ? "improves" : "deteriorates", 1.5 + u);
                cot["reason"] = strf(
                    "Margin dynamics and turnover point to a %s in earnings per share next "
                    "year; liquidity limits the downside.",
                    direction == 1 ? "rise" : "decline");
                json lps = json::array();
                for (int k = 0; k < 6; ++k) {
                    lps.push_back(std::round((lp_base - 0.01 * k) * 1e4) / 1e4);
                }
                cot["_token_logprobs"] = lps;
                responses[strf("%s:%d:cot", f.id.c_str(), year)] = cot;

                const bool simple_correct = rng.uniform() < (p.mock_accuracy - 0.08);
                json simple;
                simple["direction"] =
                    (simple_correct ? target : 1 - target) == 1 ? "increase" : "decrease";
                simple["_token_logprobs"] = json::array({-0.2, -0.4});
                responses[strf("%s:%d:simple", f.id.c_str(), year)] = simple;

                json guess;
                guess["firm_names"] = json::parse(kFamousNames);
                const int year_guesses[3] = {2019, 2020, 2021};
                guess["fiscal_year"] = year_guesses[rng.uniform_int(3)];
                responses[strf("%s:%d:guess_identity", f.id.c_str(), year)] = guess;
            }
        }
        json file;
        file["fallback"] = false;
        file["responses"] = responses;
        std::ofstream out(fs::path(output_dir) / "mock_responses.json");
        out << file.dump(1) << "\n";
    }

    // manifest
    {
        json m;
        m["generator"] = "synthetic-universe";
        m["version"] = 1;
        m["n_firms"] = p.n_firms;
        m["first_year"] = p.first_year;
        m["last_year"] = p.last_year;
        m["n_industries"] = p.n_industries;
        m["seed"] = p.seed;
        m["mean_reversion"] = p.mean_reversion;
        m["signal_strength"] = p.signal_strength;
        m["margin_noise"] = p.margin_noise;
        m["sales_growth_mean"] = p.sales_growth_mean;
        m["sales_growth_vol"] = p.sales_growth_vol;
        m["max_analysts"] = p.max_analysts;
        m["analyst_bias"] = p.analyst_bias;
        m["analyst_noise"] = p.analyst_noise;
        m["return_signal"] = p.return_signal;
        m["market_vol"] = p.market_vol;
        m["idio_vol"] = p.idio_vol;
        m["emit_mock_responses"] = p.emit_mock_responses;
        m["mock_accuracy"] = p.mock_accuracy;
        m["mock_confidence_calibration"] = p.mock_confidence_calibration;
        std::ofstream out(fs::path(output_dir) / "manifest.json");
        out << m.dump(2) << "\n";
    }
}

SynthParams synth_params_from_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest: " + manifest_path);
    json m;
    in >> m;
    SynthParams p;
    p.n_firms = m.value("n_firms", p.n_firms);
    p.first_year = m.value("first_year", p.first_year);
    p.last_year = m.value("last_year", p.last_year);
    p.n_industries = m.value("n_industries", p.n_industries);
    p.seed = m.value("seed", p.seed);
    p.mean_reversion = m.value("mean_reversion", p.mean_reversion);
    p.signal_strength = m.value("signal_strength", p.signal_strength);
    p.margin_noise = m.value("margin_noise", p.margin_noise);
    p.sales_growth_mean = m.value("sales_growth_mean", p.sales_growth_mean);
    p.sales_growth_vol = m.value("sales_growth_vol", p.sales_growth_vol);
    p.max_analysts = m.value("max_analysts", p.max_analysts);
    p.analyst_bias = m.value("analyst_bias", p.analyst_bias);
    p.analyst_noise = m.value("analyst_noise", p.analyst_noise);
    p.return_signal = m.value("return_signal", p.return_signal);
    p.market_vol = m.value("market_vol", p.market_vol);
    p.idio_vol = m.value("idio_vol", p.idio_vol);
    p.emit_mock_responses = m.value("emit_mock_responses", p.emit_mock_responses);
    p.mock_accuracy = m.value("mock_accuracy", p.mock_accuracy);
    p.mock_confidence_calibration =
        m.value("mock_confidence_calibration", p.mock_confidence_calibration);
    return p;
}

}  // namespace fsa
