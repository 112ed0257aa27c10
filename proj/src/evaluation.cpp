#include "fsa/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "fsa/fundamentals.hpp"
#include "fsa/rng.hpp"

namespace fsa {

namespace {

ScoreResult score_counts(const ConfusionCounts& c) {
    ScoreResult r;
    r.counts = c;
    const long total = c.total();
    if (total == 0) throw Error("score: empty evaluation set");
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    const long denom = 2 * c.tp + c.fp + c.fn;
    r.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    return r;
}

std::vector<std::pair<int, int>> evaluated_pairs(const PredictionSet& predictions,
                                                 const std::map<FirmYear, int>& targets) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& [key, entry] : predictions.entries) {
        auto it = targets.find(key);
        if (it == targets.end()) continue;
        pairs.emplace_back(entry.pred, it->second);
    }
    return pairs;
}

}  // namespace

ScoreResult score_pairs(const std::vector<std::pair<int, int>>& pairs) {
    ConfusionCounts c;
    for (const auto& [pred, actual] : pairs) {
        if (pred == 1 && actual == 1) ++c.tp;
        else if (pred == 1 && actual == 0) ++c.fp;
        else if (pred == 0 && actual == 1) ++c.fn;
        else ++c.tn;
    }
    return score_counts(c);
}

ScoreResult score(const PredictionSet& predictions, const std::map<FirmYear, int>& targets) {
    return score_pairs(evaluated_pairs(predictions, targets));
}

std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& targets) {
    if (scores.size() != targets.size()) throw Error("auc: score/target size mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int t : targets) n_pos += t == 1 ? 1 : 0;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    // midrank formulation
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (size_t k = 0; k < n; ++k) {
        if (targets[k] == 1) pos_rank_sum += rank[k];
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::optional<double> auc(const PredictionSet& predictions,
                          const std::map<FirmYear, int>& targets) {
    std::vector<double> scores;
    std::vector<int> y;
    for (const auto& [key, entry] : predictions.entries) {
        if (!entry.score) continue;
        auto it = targets.find(key);
        if (it == targets.end()) continue;
        scores.push_back(*entry.score);
        y.push_back(it->second);
    }
    if (scores.empty()) return std::nullopt;
    return auc(scores, y);
}

BootstrapInterval bootstrap_ci(MetricKind metric, const PredictionSet& predictions,
                               const std::map<FirmYear, int>& targets,
                               const BootstrapOptions& options) {
    const auto pairs = evaluated_pairs(predictions, targets);
    if (pairs.empty()) throw Error("bootstrap_ci: empty evaluation set");

    auto metric_of = [metric](const std::vector<std::pair<int, int>>& p) {
        const ScoreResult s = score_pairs(p);
        return metric == MetricKind::Accuracy ? s.accuracy : s.f1;
    };

    BootstrapInterval out;
    out.point = metric_of(pairs);
    out.small_population = pairs.size() < static_cast<size_t>(options.draw_size);

    std::vector<double> draws(static_cast<size_t>(options.draws));
    std::vector<std::pair<int, int>> sample(static_cast<size_t>(options.draw_size));
    for (int d = 0; d < options.draws; ++d) {
        Rng rng(derive_seed(options.seed, static_cast<uint64_t>(d)));
        for (int i = 0; i < options.draw_size; ++i) {
            sample[static_cast<size_t>(i)] = pairs[rng.uniform_int(pairs.size())];
        }
        draws[static_cast<size_t>(d)] = metric_of(sample);
    }
    const double tail = (1.0 - options.level) / 2.0;
    out.low = percentile_nearest_rank(draws, tail);
    out.high = percentile_nearest_rank(draws, 1.0 - tail);
    return out;
}

std::vector<PartitionGroup> partition_report(const PredictionSet& predictions,
                                             const std::map<FirmYear, int>& targets,
                                             PartitionKey key) {
    struct Row {
        int pred, actual;
        double value;
        std::string label;
    };
    std::vector<Row> rows;
    for (const auto& [fy, entry] : predictions.entries) {
        auto it = targets.find(fy);
        if (it == targets.end()) continue;
        Row r{entry.pred, it->second, 0.0, ""};
        switch (key) {
            case PartitionKey::ConfidenceQuartile:
                if (!entry.confidence) continue;
                r.value = *entry.confidence;
                break;
            case PartitionKey::LogprobQuartile:
                if (!entry.mean_logprob) continue;
                r.value = *entry.mean_logprob;
                break;
            case PartitionKey::Magnitude:
                if (!entry.magnitude) continue;
                r.label = to_string(*entry.magnitude);
                break;
            case PartitionKey::Provider:
                if (entry.provider.empty()) continue;
                r.label = entry.provider;
                break;
        }
        rows.push_back(std::move(r));
    }

    if (key == PartitionKey::ConfidenceQuartile || key == PartitionKey::LogprobQuartile) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (const auto& r : rows) values.push_back(r.value);
        const double q1 = percentile_nearest_rank(values, 0.25);
        const double q2 = percentile_nearest_rank(values, 0.50);
        const double q3 = percentile_nearest_rank(values, 0.75);
        for (auto& r : rows) {
            // ties at a cut point fall to the lower quartile
            if (r.value <= q1) r.label = "Q1";
            else if (r.value <= q2) r.label = "Q2";
            else if (r.value <= q3) r.label = "Q3";
            else r.label = "Q4";
        }
    }

    std::map<std::string, std::vector<std::pair<int, int>>> groups;
    for (const auto& r : rows) groups[r.label].emplace_back(r.pred, r.actual);

    std::vector<PartitionGroup> out;
    // magnitude groups in the canonical vocabulary order
    std::vector<std::string> order;
    if (key == PartitionKey::Magnitude) {
        order = {"large", "moderate", "small"};
    } else {
        for (const auto& [label, g] : groups) order.push_back(label);
    }
    for (const auto& label : order) {
        auto it = groups.find(label);
        if (it == groups.end() || it->second.empty()) continue;
        const ScoreResult s = score_pairs(it->second);
        PartitionGroup g;
        g.label = label;
        g.n = static_cast<long>(it->second.size());
        g.accuracy = s.accuracy;
        g.f1 = s.f1;
        out.push_back(std::move(g));
    }
    return out;
}

double random_guess_probability(const std::map<int, double>& per_year_hit_prob,
                                const std::map<int, double>& per_year_share) {
    if (per_year_hit_prob.size() != per_year_share.size()) {
        throw Error("random_guess_probability: year sets differ in size");
    }
    double share_sum = 0.0;
    for (const auto& [year, q] : per_year_share) {
        if (!per_year_hit_prob.count(year)) {
            throw Error(strf("random_guess_probability: year %d missing from hit probabilities",
                             year));
        }
        share_sum += q;
    }
    if (std::abs(share_sum - 1.0) > 1e-9) {
        throw Error(strf("random_guess_probability: shares sum to %.12f, expected 1", share_sum));
    }
    double prob = 0.0;
    for (const auto& [year, q] : per_year_share) prob += per_year_hit_prob.at(year) * q;
    return prob;
}

}  // namespace fsa
