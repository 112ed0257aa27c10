#include "fsa/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fsa {

using nlohmann::json;
namespace fs = std::filesystem;

bool ExperimentConfig::wants(const std::string& method) const {
    return std::find(methods.begin(), methods.end(), method) != methods.end();
}

bool ExperimentConfig::wants_analysts() const {
    return wants("analyst_1m") || wants("analyst_3m") || wants("analyst_6m");
}

bool ExperimentConfig::wants_llm() const {
    return wants("gpt_cot") || wants("gpt_simple") || wants_embeddings();
}

bool ExperimentConfig::wants_embeddings() const {
    return wants("embed_ann") || wants("dual_ann") || wants("embed_ablations");
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty()) return path;
    const fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw Error(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    if (!j.contains("seed")) throw Error("config: 'seed' is required");
    c.seed = j["seed"].get<uint64_t>();
    if (!j.contains("years") || !j["years"].contains("from") || !j["years"].contains("to")) {
        throw Error("config: 'years.from' and 'years.to' are required");
    }
    c.from_year = j["years"]["from"].get<int>();
    c.to_year = j["years"]["to"].get<int>();

    const json data = j.value("data", json::object());
    c.fundamentals_path = resolve(base_dir, data.value("fundamentals", ""));
    c.analysts_path = resolve(base_dir, data.value("analysts", ""));
    c.returns_path = resolve(base_dir, data.value("returns", ""));
    c.factors_path = resolve(base_dir, data.value("factors", ""));

    c.output_dir = resolve(base_dir, j.value("output_dir", "out"));
    c.cache_dir = resolve(base_dir, j.value("cache_dir", ""));
    c.recipe_path = resolve(base_dir, j.value("recipe", ""));
    c.lexicon_path = resolve(base_dir, j.value("lexicon", ""));

    c.methods = j.value("methods", std::vector<std::string>{"random_walk"});

    if (j.contains("provider")) {
        const json& p = j["provider"];
        c.provider.kind = p.value("kind", c.provider.kind);
        c.provider.name = p.value("name", c.provider.name);
        c.provider.model = p.value("model", c.provider.model);
        c.provider.base_url = p.value("base_url", c.provider.base_url);
        c.provider.api_key_env = p.value("api_key_env", c.provider.api_key_env);
        c.provider.scripted_responses =
            resolve(base_dir, p.value("scripted_responses", c.provider.scripted_responses));
        c.provider.parallelism = p.value("parallelism", c.provider.parallelism);
        c.provider.backoff_ms = p.value("backoff_ms", c.provider.backoff_ms);
        c.provider.rate_limit_per_minute =
            p.value("rate_limit_per_minute", c.provider.rate_limit_per_minute);
        c.provider.mock_fallback = p.value("mock_fallback", c.provider.mock_fallback);
    }
    if (j.contains("embedding")) {
        const json& e = j["embedding"];
        c.embedding.kind = e.value("kind", c.embedding.kind);
        c.embedding.name = e.value("name", c.embedding.name);
        c.embedding.model = e.value("model", c.embedding.model);
        c.embedding.base_url = e.value("base_url", c.embedding.base_url);
        c.embedding.api_key_env = e.value("api_key_env", c.embedding.api_key_env);
        c.embedding.dimension = e.value("dimension", c.embedding.dimension);
        c.embedding.token_limit = e.value("token_limit", c.embedding.token_limit);
    }
    if (j.contains("backtest")) {
        const json& b = j["backtest"];
        c.backtest.enabled = b.value("enabled", c.backtest.enabled);
        c.backtest.weightings = b.value("weightings", c.backtest.weightings);
        c.backtest.transaction_cost_bps =
            b.value("transaction_cost_bps", c.backtest.transaction_cost_bps);
        c.backtest.newey_west_lags = b.value("newey_west_lags", c.backtest.newey_west_lags);
    }
    if (j.contains("flags")) {
        const json& f = j["flags"];
        c.stepwise_alpha = f.value("stepwise_alpha", c.stepwise_alpha);
        c.answer_token_logprobs = f.value("answer_token_logprobs", c.answer_token_logprobs);
        c.mlp_max_epochs = f.value("mlp_max_epochs", c.mlp_max_epochs);
        c.mlp_learning_rates = f.value("mlp_learning_rates", c.mlp_learning_rates);
        c.mlp_dropouts = f.value("mlp_dropouts", c.mlp_dropouts);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), fs::path(path).parent_path().string());
}

void validate_config(const ExperimentConfig& c) {
    if (c.to_year < c.from_year) throw Error("config: empty year range");
    if (c.methods.empty()) throw Error("config: no methods selected");
    auto require_file = [](const std::string& path, const std::string& what) {
        if (path.empty()) throw Error("config: missing path for " + what);
        if (!fs::exists(path)) throw Error("config: " + what + " file not found: " + path);
    };
    require_file(c.fundamentals_path, "fundamentals");
    if (c.wants_analysts()) require_file(c.analysts_path, "analysts");
    if (c.backtest.enabled) {
        require_file(c.returns_path, "returns");
        require_file(c.factors_path, "factors");
    }
    const bool needs_recipe = c.wants("logit") || c.wants("ann_op");
    if (needs_recipe) require_file(c.recipe_path, "predictor recipe");
    if (c.wants_llm() && c.provider.kind == "mock" && !c.provider.scripted_responses.empty()) {
        require_file(c.provider.scripted_responses, "scripted responses");
    }
    if (c.provider.kind == "http" && c.provider.base_url.empty()) {
        throw Error("config: http provider requires base_url");
    }
    for (const auto& w : c.backtest.weightings) {
        if (w != "ew" && w != "vw") throw Error("config: unknown weighting '" + w + "'");
    }
    if (c.embedding.dimension <= 0) throw Error("config: embedding dimension must be positive");
}

}  // namespace fsa
