#pragma once

#include <cstdint>
#include <string>

namespace fsa {

/// Data-generating process for the synthetic universe. Earnings follow a
/// margin process with tunable mean reversion and an observable signal
/// (embedded in the SG&A ratio) that predicts next-year changes; analyst
/// forecasts are truth plus bias and noise; returns carry a drift aligned
/// with the future earnings direction. All four data files plus the scripted
/// mock-responses file are reproducible from the manifest.
struct SynthParams {
    int n_firms = 100;
    int first_year = 1995;
    int last_year = 2012;
    int n_industries = 10;
    uint64_t seed = 1;

    // earnings process
    double mean_reversion = 0.5;   // kappa: pull of net margin toward its mean
    double signal_strength = 1.0;  // gamma: effect of the observable signal
    double margin_noise = 0.02;    // sigma of margin innovations
    double sales_growth_mean = 0.04;
    double sales_growth_vol = 0.08;

    // analysts
    int max_analysts = 7;
    double analyst_bias = 0.12;
    double analyst_noise = 1.6;

    // returns
    double return_signal = 0.015;  // monthly drift toward the realized direction
    double market_vol = 0.045;
    double idio_vol = 0.07;

    // scripted LLM responses
    bool emit_mock_responses = true;
    double mock_accuracy = 0.62;
    double mock_confidence_calibration = 0.0;  // 1 = confidence equals correctness
};

/// Writes fundamentals.csv, analysts.csv, returns.csv, factors.csv,
/// mock_responses.json (optional) and manifest.json into `output_dir`.
/// Regeneration from the same manifest is byte-identical.
void generate_synthetic_universe(const SynthParams& params, const std::string& output_dir);

SynthParams synth_params_from_manifest(const std::string& manifest_path);

}  // namespace fsa
