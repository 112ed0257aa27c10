#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsa/baselines.hpp"
#include "fsa/common.hpp"
#include "fsa/llm_client.hpp"

namespace fsa {

enum class NarrativePart { Trend, Ratio, Rationale };
std::string to_string(NarrativePart p);

/// Text -> fixed-width vector. Implementations report their dimension and the
/// token budget per call (whitespace tokens, conservative).
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual int dimension() const = 0;
    virtual int token_limit() const { return 512; }
    virtual std::vector<double> embed(const std::string& text) = 0;
};

/// Deterministic mock: the vector is derived from a hash of the text, values
/// in [-1, 1]. Same text, same vector.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(int dimension, int token_limit = 512)
        : dim_(dimension), token_limit_(token_limit) {}

    std::string name() const override { return "hash-mock"; }
    int dimension() const override { return dim_; }
    int token_limit() const override { return token_limit_; }
    std::vector<double> embed(const std::string& text) override;

    int calls() const { return calls_; }

private:
    int dim_;
    int token_limit_;
    int calls_ = 0;
    std::mutex mu_;
};

/// Test double with explicit text -> vector entries.
class ScriptedEmbeddingProvider : public EmbeddingProvider {
public:
    ScriptedEmbeddingProvider(int dimension, int token_limit)
        : dim_(dimension), token_limit_(token_limit) {}

    std::string name() const override { return "scripted"; }
    int dimension() const override { return dim_; }
    int token_limit() const override { return token_limit_; }
    std::vector<double> embed(const std::string& text) override;

    void add(const std::string& text, std::vector<double> vec);
    int calls() const { return calls_; }

private:
    int dim_;
    int token_limit_;
    std::map<std::string, std::vector<double>> entries_;
    int calls_ = 0;
};

/// OpenAI-style embeddings endpoint.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    struct Options {
        std::string provider_name;
        std::string base_url;
        std::string path = "/v1/embeddings";
        std::string model;
        std::string api_key_env;
        int dimension = 0;
        int token_limit = 512;
        int timeout_seconds = 120;
    };
    explicit HttpEmbeddingProvider(Options options);

    std::string name() const override { return options_.provider_name; }
    int dimension() const override { return options_.dimension; }
    int token_limit() const override { return options_.token_limit; }
    std::vector<double> embed(const std::string& text) override;

private:
    Options options_;
};

struct NarrativeEmbedding {
    FirmYear firm_year;
    std::vector<double> vector;
    std::set<NarrativePart> parts_included;
    int chunk_count = 1;
};

/// Concatenates the selected narrative parts (trend, ratio, rationale order).
std::string narrative_text(const CotResponse& response, const std::set<NarrativePart>& parts);

/// Caches embeddings in the same per-key JSON layout as the chat cache.
class EmbeddingClient {
public:
    EmbeddingClient(EmbeddingProvider& provider, std::string cache_dir = "");

    /// Embeds the selected parts; texts over the provider token limit are
    /// split into maximal non-overlapping chunks whose vectors are averaged.
    NarrativeEmbedding embed_narrative(const FirmYear& firm_year, const CotResponse& response,
                                       const std::set<NarrativePart>& parts);

    /// Chunk-then-average embedding of arbitrary text.
    std::vector<double> embed_text(const std::string& text, int* chunk_count = nullptr);

    int provider_calls() const { return provider_calls_; }

private:
    std::vector<double> embed_one(const std::string& chunk);

    EmbeddingProvider& provider_;
    std::string cache_dir_;
    int provider_calls_ = 0;
    std::mutex mu_;
};

/// Splits text into chunks of at most `token_limit` whitespace tokens,
/// preserving order; the final chunk holds the remainder.
std::vector<std::string> chunk_text(const std::string& text, int token_limit);

/// Embedding rows as a feature matrix, aligned with the firm-year keys.
FeatureMatrix embeddings_to_matrix(const std::vector<NarrativeEmbedding>& embeddings);

/// Rolling MLP on narrative embeddings: identical training schedule to the
/// numeric baselines, with the embedding inputs left unscaled.
MethodRun fit_embedding_ann(const FeatureMatrix& embeddings,
                            const std::map<FirmYear, int>& targets, RollingConfig config);

/// Rolling MLP on [embedding | numeric] rows (full non-linear interactions);
/// only the numeric block is standardized. Rows are matched by firm-year.
MethodRun fit_dual_input_ann(const FeatureMatrix& embeddings, const FeatureMatrix& fs_features,
                             const std::map<FirmYear, int>& targets, RollingConfig config);

/// Ranked n-gram relative frequencies over a corpus (lowercased, punctuation
/// stripped; n-grams never cross text boundaries). Frequencies are scaled by
/// the total n-gram count. Ties rank lexicographically for determinism.
std::vector<std::pair<std::string, double>> ngram_report(const std::vector<std::string>& texts,
                                                         int n, size_t top_k);

}  // namespace fsa
