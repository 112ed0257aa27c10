#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsa/common.hpp"

namespace fsa {

struct ProviderConfig {
    std::string kind = "mock";  // "mock" | "http"
    std::string name = "mock";
    std::string model = "mock-1";
    std::string base_url;
    std::string api_key_env;
    std::string scripted_responses;  // mock only
    int parallelism = 1;
    int backoff_ms = 100;
    int rate_limit_per_minute = 0;  // http only; 0 = unlimited
    bool mock_fallback = false;
};

struct EmbeddingConfig {
    std::string kind = "hash";  // "hash" | "http"
    std::string name = "hash-mock";
    std::string model;
    std::string base_url;
    std::string api_key_env;
    int dimension = 64;
    int token_limit = 512;
};

struct BacktestConfig {
    bool enabled = true;
    std::vector<std::string> weightings = {"ew"};
    double transaction_cost_bps = 0.0;  // 0 disables the cost overlay
    int newey_west_lags = -1;
};

/// One experiment, fully determined by this file plus the caches.
struct ExperimentConfig {
    uint64_t seed = 0;
    int from_year = 0;
    int to_year = 0;

    std::string fundamentals_path;
    std::string analysts_path;
    std::string returns_path;
    std::string factors_path;

    std::string output_dir;
    std::string cache_dir;       // chat + embedding caches live under here
    std::string recipe_path;     // predictor recipe JSON
    std::string lexicon_path;    // anonymity lexicon (optional)

    std::vector<std::string> methods;
    ProviderConfig provider;
    EmbeddingConfig embedding;
    BacktestConfig backtest;

    double stepwise_alpha = 0.05;
    bool answer_token_logprobs = false;
    int mlp_max_epochs = 50;
    std::vector<double> mlp_learning_rates = {1e-5, 1e-3, 1e-1};
    std::vector<double> mlp_dropouts = {0.0, 0.2, 0.4};

    bool wants(const std::string& method) const;
    bool wants_analysts() const;
    bool wants_llm() const;
    bool wants_embeddings() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const std::string& json_text,
                                  const std::string& base_dir = "");

/// Throws Error (validation) when the config is internally inconsistent or a
/// referenced input file is missing for an enabled stage.
void validate_config(const ExperimentConfig& config);

}  // namespace fsa
