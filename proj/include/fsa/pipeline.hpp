#pragma once

#include <map>
#include <string>
#include <vector>

#include "fsa/config.hpp"
#include "fsa/evaluation.hpp"
#include "fsa/predictions.hpp"

namespace fsa {

struct PipelineResult {
    int exit_code = 0;  // 0 ok, 1 structural error, 2 validation error
    int provider_calls = 0;
    int embedding_calls = 0;
    int parse_failures = 0;
    std::vector<std::string> errors;  // itemized partial failures
    std::map<std::string, PredictionSet> predictions;
    std::map<std::string, ScoreResult> scores;
};

/// Runs ingest -> render -> predict -> evaluate -> backtest -> report and
/// writes the full bundle under config.output_dir. Partial provider failures
/// leave the pipeline running on the successful subset.
PipelineResult run_pipeline(const ExperimentConfig& config);

/// Memory probe: renders, asks for identity guesses, reports hit rates and
/// the year-guess distribution. Writes guess_report.json in the output dir.
struct GuessProbeResult {
    int n = 0;
    int top1_hits = 0;
    int top10_hits = 0;
    int year_hits = 0;
    double random_guess_prob = 0.0;  // from the realized guess/sample shares
    std::vector<std::string> errors;
};

GuessProbeResult run_guess_probe(const ExperimentConfig& config, int sample_limit = 0);

}  // namespace fsa
