#include "fsa/narrative.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fsa/digest.hpp"
#include "fsa/rng.hpp"

namespace fsa {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(NarrativePart p) {
    switch (p) {
        case NarrativePart::Trend: return "trend";
        case NarrativePart::Ratio: return "ratio";
        case NarrativePart::Rationale: return "rationale";
    }
    return "unknown";
}

std::vector<double> HashEmbeddingProvider::embed(const std::string& text) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    const uint64_t h = splitmix64(std::hash<std::string>{}(text) ^ 0xe31bedd1ULL);
    std::vector<double> v(dim_);
    for (int i = 0; i < dim_; ++i) {
        const uint64_t hi = splitmix64(h + static_cast<uint64_t>(i) * 0x9e3779b9ULL);
        v[i] = 2.0 * (static_cast<double>(hi >> 11) * 0x1.0p-53) - 1.0;
    }
    return v;
}

std::vector<double> ScriptedEmbeddingProvider::embed(const std::string& text) {
    ++calls_;
    auto it = entries_.find(text);
    if (it == entries_.end()) {
        throw TransportError("scripted embedding provider has no entry for text");
    }
    return it->second;
}

void ScriptedEmbeddingProvider::add(const std::string& text, std::vector<double> vec) {
    if (static_cast<int>(vec.size()) != dim_) throw Error("scripted embedding wrong width");
    entries_[text] = std::move(vec);
}

std::string narrative_text(const CotResponse& response, const std::set<NarrativePart>& parts) {
    if (parts.empty()) throw Error("narrative_text: no parts selected");
    std::string out;
    auto append = [&out](const std::string& s) {
        if (s.empty()) return;
        if (!out.empty()) out += "\n";
        out += s;
    };
    if (parts.count(NarrativePart::Trend)) append(response.trend_analysis);
    if (parts.count(NarrativePart::Ratio)) append(response.ratio_analysis);
    if (parts.count(NarrativePart::Rationale)) append(response.rationale);
    return out;
}

std::vector<std::string> chunk_text(const std::string& text, int token_limit) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    std::vector<std::string> chunks;
    if (tokens.empty()) return chunks;
    const size_t limit = token_limit > 0 ? static_cast<size_t>(token_limit) : tokens.size();
    for (size_t start = 0; start < tokens.size(); start += limit) {
        const size_t end = std::min(tokens.size(), start + limit);
        std::string chunk;
        for (size_t i = start; i < end; ++i) {
            if (i > start) chunk += ' ';
            chunk += tokens[i];
        }
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

EmbeddingClient::EmbeddingClient(EmbeddingProvider& provider, std::string cache_dir)
    : provider_(provider), cache_dir_(std::move(cache_dir)) {
    if (!cache_dir_.empty()) fs::create_directories(cache_dir_);
}

std::vector<double> EmbeddingClient::embed_one(const std::string& chunk) {
    std::string key;
    if (!cache_dir_.empty()) {
        key = sha256_hex(provider_.name() + "\n" + std::to_string(provider_.dimension()) + "\n" +
                         chunk);
        const fs::path p = fs::path(cache_dir_) / (key + ".json");
        std::ifstream in(p);
        if (in) {
            json j;
            try {
                in >> j;
                auto v = j.at("vector").get<std::vector<double>>();
                if (static_cast<int>(v.size()) == provider_.dimension()) return v;
            } catch (const json::exception&) {
                // treat as miss
            }
        }
    }
    std::vector<double> v = provider_.embed(chunk);
    if (static_cast<int>(v.size()) != provider_.dimension()) {
        throw Error("embedding provider returned wrong width");
    }
    {
        std::lock_guard lock(mu_);
        ++provider_calls_;
    }
    if (!cache_dir_.empty()) {
        std::lock_guard lock(mu_);
        const fs::path p = fs::path(cache_dir_) / (key + ".json");
        if (!fs::exists(p)) {
            json j;
            j["key"] = key;
            j["provider"] = provider_.name();
            j["dimension"] = provider_.dimension();
            j["vector"] = v;
            const fs::path tmp = p.string() + ".tmp";
            {
                std::ofstream out(tmp);
                out << j.dump() << "\n";
            }
            fs::rename(tmp, p);
        }
    }
    return v;
}

std::vector<double> EmbeddingClient::embed_text(const std::string& text, int* chunk_count) {
    const auto chunks = chunk_text(text, provider_.token_limit());
    if (chunks.empty()) throw Error("cannot embed empty text");
    if (chunk_count) *chunk_count = static_cast<int>(chunks.size());
    std::vector<double> mean(provider_.dimension(), 0.0);
    for (const auto& chunk : chunks) {
        const auto v = embed_one(chunk);
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    for (double& m : mean) m /= static_cast<double>(chunks.size());
    return mean;
}

NarrativeEmbedding EmbeddingClient::embed_narrative(const FirmYear& firm_year,
                                                    const CotResponse& response,
                                                    const std::set<NarrativePart>& parts) {
    const std::string text = narrative_text(response, parts);
    if (text.empty()) throw Error("cannot embed narrative: selected parts are empty");
    NarrativeEmbedding out;
    out.firm_year = firm_year;
    out.parts_included = parts;
    out.vector = embed_text(text, &out.chunk_count);
    return out;
}

FeatureMatrix embeddings_to_matrix(const std::vector<NarrativeEmbedding>& embeddings) {
    FeatureMatrix m;
    if (embeddings.empty()) return m;
    const size_t width = embeddings.front().vector.size();
    for (size_t d = 0; d < width; ++d) m.names.push_back(strf("emb_%03zu", d));
    m.values.resize(static_cast<Eigen::Index>(embeddings.size()),
                    static_cast<Eigen::Index>(width));
    for (size_t i = 0; i < embeddings.size(); ++i) {
        const auto& e = embeddings[i];
        if (e.vector.size() != width) throw Error("embedding width mismatch across observations");
        m.keys.push_back(e.firm_year);
        m.years.push_back(e.firm_year.fiscal_year);
        m.industries.push_back(0);
        for (size_t d = 0; d < width; ++d) {
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = e.vector[d];
        }
    }
    return m;
}

MethodRun fit_embedding_ann(const FeatureMatrix& embeddings,
                            const std::map<FirmYear, int>& targets, RollingConfig config) {
    config.standardize_mask.assign(static_cast<size_t>(embeddings.values.cols()), false);
    MethodRun run = run_rolling_mlp(embeddings, targets, config);
    run.predictions.method = "embed_ann";
    return run;
}

MethodRun fit_dual_input_ann(const FeatureMatrix& embeddings, const FeatureMatrix& fs_features,
                             const std::map<FirmYear, int>& targets, RollingConfig config) {
    std::map<FirmYear, Eigen::Index> fs_row;
    for (size_t i = 0; i < fs_features.keys.size(); ++i) {
        fs_row[fs_features.keys[i]] = static_cast<Eigen::Index>(i);
    }
    FeatureMatrix dual;
    dual.names = embeddings.names;
    for (const auto& n : fs_features.names) dual.names.push_back(n);
    std::vector<Eigen::Index> keep;
    for (size_t i = 0; i < embeddings.keys.size(); ++i) {
        if (fs_row.count(embeddings.keys[i])) keep.push_back(static_cast<Eigen::Index>(i));
    }
    dual.values.resize(static_cast<Eigen::Index>(keep.size()),
                       embeddings.values.cols() + fs_features.values.cols());
    for (size_t i = 0; i < keep.size(); ++i) {
        const Eigen::Index e = keep[i];
        const auto& key = embeddings.keys[static_cast<size_t>(e)];
        dual.keys.push_back(key);
        dual.years.push_back(embeddings.years[static_cast<size_t>(e)]);
        dual.industries.push_back(
            fs_features.industries[static_cast<size_t>(fs_row.at(key))]);
        dual.values.row(static_cast<Eigen::Index>(i)) << embeddings.values.row(e),
            fs_features.values.row(fs_row.at(key));
    }
    // standardize only the numeric half
    config.standardize_mask.assign(static_cast<size_t>(dual.values.cols()), true);
    for (Eigen::Index c = 0; c < embeddings.values.cols(); ++c) {
        config.standardize_mask[static_cast<size_t>(c)] = false;
    }
    MethodRun run = run_rolling_mlp(dual, targets, config);
    run.predictions.method = "dual_ann";
    return run;
}

std::vector<std::pair<std::string, double>> ngram_report(const std::vector<std::string>& texts,
                                                         int n, size_t top_k) {
    if (n != 1 && n != 2) throw Error("ngram_report supports n = 1 or 2");
    std::map<std::string, size_t> counts;
    size_t total = 0;
    for (const auto& text : texts) {
        std::string norm;
        norm.reserve(text.size());
        for (char raw : text) {
            const unsigned char c = static_cast<unsigned char>(raw);
            norm += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ';
        }
        std::istringstream in(norm);
        std::vector<std::string> tokens;
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
        if (tokens.size() < static_cast<size_t>(n)) continue;
        for (size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int k = 1; k < n; ++k) gram += " " + tokens[i + k];
            ++counts[gram];
            ++total;
        }
    }
    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(counts.size());
    for (const auto& [gram, count] : counts) {
        ranked.emplace_back(gram, static_cast<double>(count) / static_cast<double>(total));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    return ranked;
}

}  // namespace fsa
