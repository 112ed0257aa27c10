#pragma once

#include <map>
#include <optional>
#include <string>

#include "fsa/common.hpp"
#include "fsa/llm_client.hpp"

namespace fsa {

/// One method's prediction for one firm-year, plus whatever scores the
/// method can attach (probability, confidence, mean token log-probability).
struct PredEntry {
    int pred = 0;  // 1 = increase
    std::optional<double> score;         // method-specific ranking score
    std::optional<double> confidence;    // LLM reported confidence
    std::optional<double> mean_logprob;  // LLM mean token log-probability
    std::optional<Magnitude> magnitude;  // LLM magnitude label
    std::string provider;                // LLM provider name, when applicable
};

struct PredictionSet {
    std::string method;
    std::map<FirmYear, PredEntry> entries;
};

/// CSV round-trip (method column included so files are self-describing).
void save_predictions(const PredictionSet& p, const std::string& path);
PredictionSet load_predictions(const std::string& path);

}  // namespace fsa
