#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsa/predictions.hpp"

namespace fsa {

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

struct ScoreResult {
    double accuracy = 0.0;
    double f1 = 0.0;
    ConfusionCounts counts;
};

/// Accuracy and F1 over the intersection of prediction and target firm-years.
/// F1 = 2*TP / (2*TP + FP + FN); a zero denominator yields 0. Throws on an
/// empty intersection.
ScoreResult score(const PredictionSet& predictions, const std::map<FirmYear, int>& targets);

ScoreResult score_pairs(const std::vector<std::pair<int, int>>& pred_target_pairs);

/// Rank-based AUC (ties count 1/2). nullopt when targets are single-class.
std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& targets);

/// AUC of a prediction set's scores against targets, over firm-years where
/// both the score and the target exist.
std::optional<double> auc(const PredictionSet& predictions,
                          const std::map<FirmYear, int>& targets);

enum class MetricKind { Accuracy, F1 };

struct BootstrapOptions {
    int draws = 1000;
    int draw_size = 1000;
    double level = 0.95;
    uint64_t seed = 0;
};

struct BootstrapInterval {
    double low = 0.0;
    double high = 0.0;
    double point = 0.0;   // metric on the full evaluated population
    bool small_population = false;  // population < draw_size (still resampled)
};

/// Percentile bootstrap interval of the metric, resampling `draw_size`
/// prediction/target pairs with replacement `draws` times. Deterministic
/// given the seed (per-draw derived seeds).
BootstrapInterval bootstrap_ci(MetricKind metric, const PredictionSet& predictions,
                               const std::map<FirmYear, int>& targets,
                               const BootstrapOptions& options);

enum class PartitionKey { ConfidenceQuartile, LogprobQuartile, Magnitude, Provider };

struct PartitionGroup {
    std::string label;
    long n = 0;
    double accuracy = 0.0;
    double f1 = 0.0;
};

/// Per-group accuracy/F1. Quartile keys cut on the evaluated population with
/// nearest-rank cut points; ties at a cut fall to the lower quartile. Empty
/// groups are omitted.
std::vector<PartitionGroup> partition_report(const PredictionSet& predictions,
                                             const std::map<FirmYear, int>& targets,
                                             PartitionKey key);

/// Expected probability that an uninformed guesser is right: sum_i p_i q_i,
/// where p_i is the per-year hit probability and q_i the per-year sample
/// share (must sum to 1 within 1e-9; year sets must match).
double random_guess_probability(const std::map<int, double>& per_year_hit_prob,
                                const std::map<int, double>& per_year_share);

}  // namespace fsa
