#include "fsa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>

#include <json.hpp>

#include "fsa/backtest.hpp"
#include "fsa/baselines.hpp"
#include "fsa/csv.hpp"
#include "fsa/features.hpp"
#include "fsa/fundamentals.hpp"
#include "fsa/narrative.hpp"
#include "fsa/panel_ols.hpp"
#include "fsa/report.hpp"
#include "fsa/rng.hpp"
#include "fsa/statements.hpp"
#include "fsa/synthetic.hpp"

namespace fsa {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string pct(double fraction) { return strf("%.2f", fraction * 100.0); }

std::unique_ptr<ChatProvider> make_chat_provider(const ProviderConfig& cfg) {
    if (cfg.kind == "mock") {
        auto mock = cfg.scripted_responses.empty()
                        ? std::make_unique<MockChatProvider>()
                        : std::make_unique<MockChatProvider>(cfg.scripted_responses);
        if (cfg.mock_fallback) mock->set_fallback(true);
        return mock;
    }
    if (cfg.kind == "http") {
        HttpChatProvider::Options opt;
        opt.provider_name = cfg.name;
        opt.base_url = cfg.base_url;
        opt.api_key_env = cfg.api_key_env;
        opt.max_requests_per_minute = cfg.rate_limit_per_minute;
        return std::make_unique<HttpChatProvider>(opt);
    }
    throw Error("unknown provider kind: " + cfg.kind);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg) {
    if (cfg.kind == "hash") {
        return std::make_unique<HashEmbeddingProvider>(cfg.dimension, cfg.token_limit);
    }
    if (cfg.kind == "http") {
        HttpEmbeddingProvider::Options opt;
        opt.provider_name = cfg.name;
        opt.base_url = cfg.base_url;
        opt.model = cfg.model;
        opt.api_key_env = cfg.api_key_env;
        opt.dimension = cfg.dimension;
        opt.token_limit = cfg.token_limit;
        return std::make_unique<HttpEmbeddingProvider>(opt);
    }
    throw Error("unknown embedding provider kind: " + cfg.kind);
}

struct LlmStage {
    PredictionSet predictions;
    std::map<FirmYear, CotResponse> responses;  // parsed CoT payloads
    std::vector<std::string> errors;
};

LlmStage run_llm_predictions(const ExperimentConfig& cfg, LlmClient& client, PromptKind kind,
                             const std::vector<FirmYearRecord>& records,
                             const std::map<FirmYear, std::string>& rendered) {
    LlmStage stage;
    stage.predictions.method = kind == PromptKind::Cot ? "gpt_cot" : "gpt_simple";
    std::mutex mu;
    parallel_for(records.size(), cfg.provider.parallelism, [&](size_t i) {
        const auto& rec = records[i];
        auto it = rendered.find(rec.key());
        if (it == rendered.end()) return;
        PromptSpec spec;
        spec.kind = kind;
        spec.statements_text = it->second;
        spec.model_name = cfg.provider.model;
        spec.tag = to_string(rec.key()) + ":" + to_string(kind);
        PredictOutcome out = client.predict(spec);
        std::lock_guard lock(mu);
        if (!out.response) {
            stage.errors.push_back(to_string(rec.key()) + ": " + out.error);
            return;
        }
        PredEntry e;
        e.pred = out.response->direction == Direction::Increase ? 1 : 0;
        e.confidence = out.response->confidence;
        e.magnitude = out.response->magnitude;
        e.provider = cfg.provider.name;
        if (!out.response->token_logprobs.empty()) {
            e.mean_logprob = cfg.answer_token_logprobs
                                 ? aggregate_logprob_answer_tokens(*out.response)
                                 : aggregate_logprob(*out.response);
        }
        e.score = out.response->confidence;
        stage.predictions.entries[rec.key()] = e;
        stage.responses[rec.key()] = *out.response;
    });
    std::sort(stage.errors.begin(), stage.errors.end());
    return stage;
}

// Characteristics panel rows for the error / informativeness regressions.
std::vector<PanelRow> characteristics_rows(
    const std::map<FirmYear, FirmCharacteristics>& chars,
    const std::map<FirmYear, int>& dep_by_key, const std::vector<FirmYearRecord>& records) {
    std::vector<PanelRow> rows;
    for (const auto& rec : records) {
        auto dit = dep_by_key.find(rec.key());
        auto cit = chars.find(rec.key());
        if (dit == dep_by_key.end() || cit == chars.end() || !cit->second.usable) continue;
        const auto& c = cit->second;
        PanelRow r;
        r.dep = dit->second;
        r.regressors = {c.size, c.btom, c.leverage, static_cast<double>(c.loss),
                        c.earnings_volatility, c.ppe};
        r.year = rec.fiscal_year;
        r.industry = rec.industry_code;
        rows.push_back(std::move(r));
    }
    return rows;
}

const std::vector<std::string> kCharNames = {"size", "btom", "leverage",
                                             "loss", "earn_vol", "ppe"};

json regression_to_json(const PanelRegressionResult& r) {
    json j;
    for (const auto& name : r.names) {
        if (!r.coefficients.count(name)) continue;
        j["coef"][name] = r.coefficients.at(name);
        j["se"][name] = r.clustered_se.at(name);
        j["t"][name] = r.t_stats.at(name);
    }
    j["adj_r2"] = r.adjusted_r2;
    j["n"] = r.n_obs;
    j["clusters"] = r.n_clusters;
    for (const auto& d : r.dropped) j["dropped"].push_back(d);
    return j;
}

std::string format6(double v) {
    return std::isnan(v) ? "" : strf("%.6f", v);
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    PipelineResult result;
    try {
        validate_config(cfg);
    } catch (const Error& e) {
        result.exit_code = 2;
        result.errors.push_back(e.what());
        return result;
    }

    try {
        fs::create_directories(cfg.output_dir);
        fs::create_directories(fs::path(cfg.output_dir) / "reports");
        fs::create_directories(fs::path(cfg.output_dir) / "predictions");

        // ---- ingest ---------------------------------------------------------
        Panel panel = Panel::load(cfg.fundamentals_path);
        std::vector<FirmYearRecord> all_records = panel.records();
        FilterOutcome filtered = apply_sample_filters(all_records);
        const std::vector<FirmYearRecord>& records = filtered.kept;
        const auto targets = target_map(build_target(panel));
        const auto characteristics = compute_characteristics(panel);

        json diagnostics;
        diagnostics["records_total"] = all_records.size();
        diagnostics["records_kept"] = records.size();
        {
            json rejects = json::array();
            for (const auto& r : filtered.rejected) {
                rejects.push_back({{"firm", r.key.firm_id},
                                   {"year", r.key.fiscal_year},
                                   {"reason", to_string(r.reason)},
                                   {"detail", r.detail}});
            }
            diagnostics["rejected"] = rejects;
        }

        // ---- render ---------------------------------------------------------
        AnonymityLexicon lexicon;
        if (!cfg.lexicon_path.empty()) lexicon = AnonymityLexicon::load(cfg.lexicon_path);
        std::map<FirmYear, std::string> rendered;
        const bool needs_render = cfg.wants_llm();
        if (needs_render) {
            for (const auto& rec : records) {
                try {
                    const auto s = standardize(rec);
                    if (!verify_anonymity(s.rendered_text, lexicon)) {
                        result.errors.push_back(to_string(rec.key()) +
                                                ": rendering failed the anonymity check");
                        continue;
                    }
                    rendered[rec.key()] = s.rendered_text;
                } catch (const Error& e) {
                    result.errors.push_back(to_string(rec.key()) + ": " + e.what());
                }
            }
        }

        // ---- predict --------------------------------------------------------
        std::map<std::string, PredictionSet> sets;
        std::map<FirmYear, CotResponse> cot_responses;

        if (cfg.wants("random_walk")) {
            sets["random_walk"] = run_random_walk(records);
        }
        std::vector<AnalystForecastRecord> forecasts;
        if (cfg.wants_analysts()) {
            forecasts = load_analyst_forecasts(cfg.analysts_path);
            for (int horizon : {1, 3, 6}) {
                const std::string method = strf("analyst_%dm", horizon);
                if (!cfg.wants(method)) continue;
                sets[method] = run_analyst_consensus(panel, records, forecasts, horizon);
            }
        }

        RollingConfig rolling;
        rolling.from_year = cfg.from_year;
        rolling.to_year = cfg.to_year;
        rolling.seed = cfg.seed;
        rolling.stepwise_alpha = cfg.stepwise_alpha;
        rolling.mlp.max_epochs = cfg.mlp_max_epochs;
        rolling.learning_rates = cfg.mlp_learning_rates;
        rolling.dropouts = cfg.mlp_dropouts;

        std::optional<FeatureMatrix> op_features;
        if (cfg.wants("logit") || cfg.wants("ann_op")) {
            const FeatureRecipe recipe = FeatureRecipe::load(cfg.recipe_path);
            op_features = assemble_op_matrix(records, recipe);
            impute_year_industry(*op_features);
        }
        std::optional<FeatureMatrix> fs_features;
        if (cfg.wants("ann_fs") || cfg.wants("dual_ann")) {
            fs_features = assemble_fs_matrix(records);
            impute_year_industry(*fs_features);
        }

        std::map<std::string, MethodRun> runs;
        if (cfg.wants("logit")) {
            runs["logit"] = run_rolling_logit(*op_features, targets, rolling);
            runs["logit"].predictions.method = "logit";
            sets["logit"] = runs["logit"].predictions;
        }
        if (cfg.wants("ann_op")) {
            RollingConfig rc = rolling;
            rc.seed = derive_seed(cfg.seed, 0xA1);
            runs["ann_op"] = run_rolling_mlp(*op_features, targets, rc);
            runs["ann_op"].predictions.method = "ann_op";
            sets["ann_op"] = runs["ann_op"].predictions;
        }
        if (cfg.wants("ann_fs")) {
            RollingConfig rc = rolling;
            rc.seed = derive_seed(cfg.seed, 0xA2);
            runs["ann_fs"] = run_rolling_mlp(*fs_features, targets, rc);
            runs["ann_fs"].predictions.method = "ann_fs";
            sets["ann_fs"] = runs["ann_fs"].predictions;
        }

        std::unique_ptr<ChatProvider> provider;
        std::unique_ptr<LlmClient> client;
        if (cfg.wants_llm()) {
            provider = make_chat_provider(cfg.provider);
            RetryPolicy retry;
            retry.backoff_base_ms = cfg.provider.backoff_ms;
            ResponseCache cache(cfg.cache_dir.empty()
                                    ? ""
                                    : (fs::path(cfg.cache_dir) / "chat").string());
            client = std::make_unique<LlmClient>(*provider, std::move(cache), lexicon, retry);
        }
        if (cfg.wants("gpt_cot") || cfg.wants_embeddings()) {
            LlmStage stage = run_llm_predictions(cfg, *client, PromptKind::Cot, records, rendered);
            cot_responses = std::move(stage.responses);
            for (const auto& e : stage.errors) result.errors.push_back("gpt_cot " + e);
            if (cfg.wants("gpt_cot")) sets["gpt_cot"] = std::move(stage.predictions);
        }
        if (cfg.wants("gpt_simple")) {
            LlmStage stage =
                run_llm_predictions(cfg, *client, PromptKind::Simple, records, rendered);
            for (const auto& e : stage.errors) result.errors.push_back("gpt_simple " + e);
            sets["gpt_simple"] = std::move(stage.predictions);
        }

        // ---- narrative embeddings -------------------------------------------
        std::unique_ptr<EmbeddingProvider> embedding_provider;
        std::unique_ptr<EmbeddingClient> embedding_client;
        if (cfg.wants_embeddings()) {
            embedding_provider = make_embedding_provider(cfg.embedding);
            embedding_client = std::make_unique<EmbeddingClient>(
                *embedding_provider, cfg.cache_dir.empty()
                                         ? ""
                                         : (fs::path(cfg.cache_dir) / "embeddings").string());

            auto embed_matrix = [&](const std::set<NarrativePart>& parts) {
                std::vector<NarrativeEmbedding> embeddings;
                for (const auto& rec : records) {
                    auto it = cot_responses.find(rec.key());
                    if (it == cot_responses.end()) continue;
                    embeddings.push_back(
                        embedding_client->embed_narrative(rec.key(), it->second, parts));
                }
                FeatureMatrix m = embeddings_to_matrix(embeddings);
                for (size_t i = 0; i < m.keys.size(); ++i) {
                    if (const FirmYearRecord* rec = panel.record(m.keys[i])) {
                        m.industries[i] = rec->industry_code;
                    }
                }
                return m;
            };

            const std::set<NarrativePart> all_parts = {
                NarrativePart::Trend, NarrativePart::Ratio, NarrativePart::Rationale};

            auto run_embed_method = [&](const std::string& method,
                                        const std::set<NarrativePart>& parts, uint64_t salt) {
                RollingConfig rc = rolling;
                rc.seed = derive_seed(cfg.seed, salt);
                MethodRun run = fit_embedding_ann(embed_matrix(parts), targets, rc);
                run.predictions.method = method;
                runs[method] = run;
                sets[method] = runs[method].predictions;
            };

            if (cfg.wants("embed_ann")) run_embed_method("embed_ann", all_parts, 0xE0);
            if (cfg.wants("embed_ablations")) {
                run_embed_method("embed_ann_excl_trend",
                                 {NarrativePart::Ratio, NarrativePart::Rationale}, 0xE1);
                run_embed_method("embed_ann_excl_ratio",
                                 {NarrativePart::Trend, NarrativePart::Rationale}, 0xE2);
                run_embed_method("embed_ann_excl_rationale",
                                 {NarrativePart::Trend, NarrativePart::Ratio}, 0xE3);
            }
            if (cfg.wants("dual_ann")) {
                RollingConfig rc = rolling;
                rc.seed = derive_seed(cfg.seed, 0xD0);
                MethodRun run =
                    fit_dual_input_ann(embed_matrix(all_parts), *fs_features, targets, rc);
                runs["dual_ann"] = run;
                sets["dual_ann"] = runs["dual_ann"].predictions;
            }
        }

        // ---- persist predictions, model dumps, window diagnostics ------------
        for (const auto& [method, set] : sets) {
            save_predictions(set, (fs::path(cfg.output_dir) / "predictions" /
                                   (method + ".csv")).string());
        }
        for (const auto& [method, run] : runs) {
            for (const auto& w : run.windows) {
                if (w.model_json.empty()) continue;
                write_text_file((fs::path(cfg.output_dir) / "models" /
                                 strf("%s_%d.json", method.c_str(), w.window.test_year))
                                    .string(),
                                w.model_json + "\n");
            }
        }
        {
            json window_diag = json::object();
            for (const auto& [method, run] : runs) {
                json windows = json::array();
                for (const auto& w : run.windows) {
                    windows.push_back({{"test_year", w.window.test_year},
                                       {"train_years", w.window.train_years},
                                       {"n_train", w.n_train},
                                       {"n_test", w.n_test},
                                       {"learning_rate", w.learning_rate},
                                       {"dropout", w.dropout},
                                       {"degenerate", w.degenerate_single_class}});
                }
                window_diag[method] = {{"windows", windows}, {"notes", run.diagnostics}};
            }
            diagnostics["methods"] = window_diag;
        }

        // ---- evaluate ---------------------------------------------------------
        json results;
        results["config"] = {{"seed", cfg.seed},
                             {"from_year", cfg.from_year},
                             {"to_year", cfg.to_year},
                             {"methods", cfg.methods}};

        BootstrapOptions boot;
        boot.seed = derive_seed(cfg.seed, 0xB007);

        auto evaluate_method = [&](const std::string& method) -> std::optional<json> {
            auto it = sets.find(method);
            if (it == sets.end() || it->second.entries.empty()) return std::nullopt;
            std::vector<std::pair<int, int>> pairs;
            for (const auto& [key, e] : it->second.entries) {
                auto t = targets.find(key);
                if (t != targets.end()) pairs.emplace_back(e.pred, t->second);
            }
            if (pairs.empty()) return std::nullopt;
            const ScoreResult s = score_pairs(pairs);
            result.scores[method] = s;
            const auto acc_ci = bootstrap_ci(MetricKind::Accuracy, it->second, targets, boot);
            const auto f1_ci = bootstrap_ci(MetricKind::F1, it->second, targets, boot);
            json m;
            m["n"] = s.counts.total();
            m["accuracy"] = s.accuracy;
            m["f1"] = s.f1;
            m["accuracy_ci"] = {acc_ci.low, acc_ci.high};
            m["f1_ci"] = {f1_ci.low, f1_ci.high};
            if (auto a = auc(it->second, targets)) m["auc"] = *a;
            return m;
        };

        const std::vector<std::string> table2_methods = {
            "random_walk", "analyst_1m", "analyst_3m", "analyst_6m", "gpt_simple", "gpt_cot"};
        const std::vector<std::string> table4_methods = {"logit", "ann_op", "ann_fs", "gpt_cot"};
        const std::vector<std::string> table7_methods = {
            "embed_ann", "ann_fs", "dual_ann", "embed_ann_excl_trend",
            "embed_ann_excl_ratio", "embed_ann_excl_rationale"};

        json metrics = json::object();
        for (const auto& [method, set] : sets) {
            if (auto m = evaluate_method(method)) metrics[method] = *m;
        }
        results["metrics"] = metrics;

        auto write_metric_table = [&](const std::string& name,
                                      const std::vector<std::string>& methods_order,
                                      bool with_auc) {
            CsvTable t(with_auc
                           ? std::vector<std::string>{"method", "n", "accuracy_pct", "f1_pct",
                                                      "auc_pct", "accuracy_ci_low_pct",
                                                      "accuracy_ci_high_pct",
                                                      "reference_accuracy_pct",
                                                      "reference_f1_pct", "reference_auc_pct"}
                           : std::vector<std::string>{"method", "n", "accuracy_pct", "f1_pct",
                                                      "accuracy_ci_low_pct",
                                                      "accuracy_ci_high_pct",
                                                      "reference_accuracy_pct",
                                                      "reference_f1_pct"});
            for (const auto& method : methods_order) {
                if (!metrics.contains(method)) continue;
                const json& m = metrics[method];
                const auto& ref = reference_prediction_benchmarks();
                auto rit = ref.find(method);
                std::vector<std::string> row = {
                    method, std::to_string(m["n"].get<long>()),
                    pct(m["accuracy"].get<double>()), pct(m["f1"].get<double>())};
                if (with_auc) {
                    row.push_back(m.contains("auc") ? pct(m["auc"].get<double>()) : "");
                }
                row.push_back(pct(m["accuracy_ci"][0].get<double>()));
                row.push_back(pct(m["accuracy_ci"][1].get<double>()));
                row.push_back(rit != ref.end() ? strf("%.2f", rit->second.accuracy) : "");
                row.push_back(rit != ref.end() ? strf("%.2f", rit->second.f1) : "");
                if (with_auc) {
                    row.push_back(rit != ref.end() && rit->second.auc
                                      ? strf("%.2f", *rit->second.auc)
                                      : "");
                }
                t.append_row(row);
            }
            t.write_file((fs::path(cfg.output_dir) / "reports" / name).string());
        };
        write_metric_table("table2.csv", table2_methods, false);
        write_metric_table("table4_panel_a.csv", table4_methods, false);
        write_metric_table("table7.csv", table7_methods, true);

        // table5: partitions of the CoT predictions
        if (sets.count("gpt_cot")) {
            CsvTable t({"partition", "group", "n", "accuracy_pct", "f1_pct",
                        "reference_accuracy_pct", "reference_f1_pct"});
            const auto& ref = reference_prediction_benchmarks();
            auto add_groups = [&](PartitionKey key, const std::string& label,
                                  const std::string& ref_prefix) {
                for (const auto& g :
                     partition_report(sets.at("gpt_cot"), targets, key)) {
                    std::string ref_key;
                    if (!ref_prefix.empty()) {
                        ref_key = ref_prefix + "_" + lowercase(g.label);
                    }
                    auto rit = ref.find(ref_key);
                    t.append_row({label, g.label, std::to_string(g.n), pct(g.accuracy),
                                  pct(g.f1),
                                  rit != ref.end() ? strf("%.2f", rit->second.accuracy) : "",
                                  rit != ref.end() ? strf("%.2f", rit->second.f1) : ""});
                }
            };
            add_groups(PartitionKey::ConfidenceQuartile, "confidence_quartile", "conf");
            add_groups(PartitionKey::LogprobQuartile, "logprob_quartile", "logprob");
            add_groups(PartitionKey::Magnitude, "magnitude", "magnitude");
            add_groups(PartitionKey::Provider, "provider", "");
            t.write_file((fs::path(cfg.output_dir) / "reports" / "table5.csv").string());

            json partitions = json::object();
            for (auto [key, label] :
                 std::vector<std::pair<PartitionKey, std::string>>{
                     {PartitionKey::ConfidenceQuartile, "confidence_quartile"},
                     {PartitionKey::LogprobQuartile, "logprob_quartile"},
                     {PartitionKey::Magnitude, "magnitude"},
                     {PartitionKey::Provider, "provider"}}) {
                json groups = json::array();
                for (const auto& g : partition_report(sets.at("gpt_cot"), targets, key)) {
                    groups.push_back({{"group", g.label},
                                      {"n", g.n},
                                      {"accuracy", g.accuracy},
                                      {"f1", g.f1}});
                }
                partitions[label] = groups;
            }
            results["partitions"] = partitions;
        }

        // accuracy by fiscal year, per method
        {
            std::set<int> all_years;
            for (const auto& [method, set] : sets) {
                for (const auto& [key, e] : set.entries) {
                    if (targets.count(key)) all_years.insert(key.fiscal_year);
                }
            }
            CsvTable t([&] {
                std::vector<std::string> h = {"fiscal_year"};
                for (const auto& [method, set] : sets) h.push_back(method);
                return h;
            }());
            std::map<std::string, std::vector<std::pair<double, double>>> series;
            for (int year : all_years) {
                std::vector<std::string> row = {std::to_string(year)};
                for (const auto& [method, set] : sets) {
                    long n = 0, correct = 0;
                    for (const auto& [key, e] : set.entries) {
                        if (key.fiscal_year != year) continue;
                        auto t2 = targets.find(key);
                        if (t2 == targets.end()) continue;
                        ++n;
                        correct += e.pred == t2->second ? 1 : 0;
                    }
                    if (n == 0) {
                        row.push_back("");
                    } else {
                        const double acc = static_cast<double>(correct) / n;
                        row.push_back(pct(acc));
                        series[method].push_back({static_cast<double>(year), acc * 100.0});
                    }
                }
                t.append_row(row);
            }
            t.write_file(
                (fs::path(cfg.output_dir) / "reports" / "accuracy_by_year.csv").string());
            for (const auto& [method, pts] : series) {
                if (pts.size() < 2) continue;
                write_text_file((fs::path(cfg.output_dir) / "reports" /
                                 ("accuracy_by_year_" + method + ".svg"))
                                    .string(),
                                svg_line_chart(pts, "accuracy by fiscal year: " + method,
                                               "fiscal year", "accuracy (%)"));
            }
        }

        // ---- error-determinant and informativeness regressions ----------------
        auto incorrect_map = [&](const std::string& method) {
            std::map<FirmYear, int> dep;
            auto it = sets.find(method);
            if (it == sets.end()) return dep;
            for (const auto& [key, e] : it->second.entries) {
                auto t = targets.find(key);
                if (t == targets.end()) continue;
                dep[key] = e.pred == t->second ? 0 : 1;
            }
            return dep;
        };

        PanelOptions fe_opts;
        fe_opts.fe_year = true;
        fe_opts.fe_industry = true;
        fe_opts.cluster_by_industry = true;

        json regressions = json::object();
        {
            CsvTable t({"table", "column", "regressor", "coef", "t_stat", "adj_r2", "n"});
            auto emit = [&](const std::string& table, const std::string& column,
                            const PanelRegressionResult& r) {
                for (const auto& name : r.names) {
                    if (!r.coefficients.count(name)) continue;
                    t.append_row({table, column, name, format6(r.coefficients.at(name)),
                                  format6(r.t_stats.at(name)), format6(r.adjusted_r2),
                                  std::to_string(r.n_obs)});
                }
                regressions[table][column] = regression_to_json(r);
            };

            // determinants of incorrect predictions
            for (const auto& method :
                 std::vector<std::string>{"gpt_cot", "analyst_1m", "analyst_3m", "analyst_6m"}) {
                const auto dep = incorrect_map(method);
                if (dep.empty()) continue;
                const auto rows = characteristics_rows(characteristics, dep, records);
                if (rows.size() < 20) continue;
                emit("table3_panel_a", method, panel_ols(rows, kCharNames, fe_opts));
            }
            for (const auto& method : std::vector<std::string>{"gpt_cot", "ann_op", "logit"}) {
                const auto dep = incorrect_map(method);
                if (dep.empty()) continue;
                const auto rows = characteristics_rows(characteristics, dep, records);
                if (rows.size() < 20) continue;
                emit("table4_panel_b", method, panel_ols(rows, kCharNames, fe_opts));
            }

            // incremental informativeness: increase ~ predictions
            auto informativeness = [&](const std::vector<std::string>& methods_in)
                -> std::optional<PanelRegressionResult> {
                std::vector<PanelRow> rows;
                for (const auto& rec : records) {
                    auto t2 = targets.find(rec.key());
                    if (t2 == targets.end()) continue;
                    PanelRow r;
                    r.dep = t2->second;
                    bool complete = true;
                    for (const auto& m : methods_in) {
                        auto s = sets.find(m);
                        if (s == sets.end() || !s->second.entries.count(rec.key())) {
                            complete = false;
                            break;
                        }
                        r.regressors.push_back(s->second.entries.at(rec.key()).pred);
                    }
                    if (!complete) continue;
                    r.year = rec.fiscal_year;
                    r.industry = rec.industry_code;
                    rows.push_back(std::move(r));
                }
                if (rows.size() < 20) return std::nullopt;
                return panel_ols(rows, methods_in, fe_opts);
            };

            const std::vector<std::vector<std::string>> table3_b = {
                {"gpt_cot"},
                {"analyst_1m"},
                {"analyst_3m"},
                {"analyst_6m"},
                {"gpt_cot", "analyst_1m"},
                {"gpt_cot", "analyst_3m"},
                {"gpt_cot", "analyst_6m"}};
            int col = 0;
            for (const auto& combo : table3_b) {
                ++col;
                if (auto r = informativeness(combo)) {
                    emit("table3_panel_b", strf("col%d", col), *r);
                }
            }
            const std::vector<std::vector<std::string>> table4_c = {
                {"gpt_cot"}, {"ann_op"}, {"logit"}, {"gpt_cot", "ann_op"}, {"gpt_cot", "logit"}};
            col = 0;
            for (const auto& combo : table4_c) {
                ++col;
                if (auto r = informativeness(combo)) {
                    emit("table4_panel_c", strf("col%d", col), *r);
                }
            }

            // bias / dispersion partitions: estimate the informativeness
            // regression inside the first and fourth quartiles of ex-ante
            // analyst bias (|fitted forecast error|) and forecast dispersion,
            // plus a stacked high-group interaction as the cross-column test.
            if (sets.count("gpt_cot") && sets.count("analyst_1m") && !forecasts.empty()) {
                std::map<std::pair<std::string, int>, std::vector<AnalystForecastRecord>> grouped;
                for (const auto& f : forecasts) {
                    grouped[{f.firm_id, f.fiscal_year_forecasted}].push_back(f);
                }
                struct BiasRow {
                    FirmYear key;
                    double error;       // (actual - median) / price
                    double dispersion;  // std(forecasts) / price
                    std::vector<double> chars;
                };
                std::vector<BiasRow> bias_rows;
                for (const auto& rec : records) {
                    auto git = grouped.find({rec.firm_id, rec.fiscal_year + 1});
                    auto cit = characteristics.find(rec.key());
                    auto eps_next = panel.eps(rec.firm_id, rec.fiscal_year + 1);
                    if (git == grouped.end() || cit == characteristics.end() ||
                        !cit->second.usable || !eps_next || !(rec.year_end_price > 0.0)) {
                        continue;
                    }
                    const auto values = consensus_forecast_values(git->second, 1);
                    if (values.size() < 3) continue;
                    const size_t n = values.size();
                    const double median =
                        n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
                    double mean = 0.0;
                    for (double v : values) mean += v;
                    mean /= static_cast<double>(n);
                    double ss = 0.0;
                    for (double v : values) ss += (v - mean) * (v - mean);
                    const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
                    const auto& c = cit->second;
                    BiasRow row;
                    row.key = rec.key();
                    row.error = (*eps_next - median) / rec.year_end_price;
                    row.dispersion = stdev / rec.year_end_price;
                    row.chars = {c.size, c.btom, c.leverage, static_cast<double>(c.loss),
                                 c.earnings_volatility, c.ppe};
                    bool finite = std::isfinite(row.error) && std::isfinite(row.dispersion);
                    for (double v : row.chars) finite = finite && std::isfinite(v);
                    if (finite) bias_rows.push_back(std::move(row));
                }
                if (bias_rows.size() >= 40) {
                    Eigen::VectorXd err(static_cast<Eigen::Index>(bias_rows.size()));
                    Eigen::MatrixXd chars_x(static_cast<Eigen::Index>(bias_rows.size()),
                                            static_cast<Eigen::Index>(kCharNames.size()));
                    for (size_t i = 0; i < bias_rows.size(); ++i) {
                        err(static_cast<Eigen::Index>(i)) = bias_rows[i].error;
                        for (size_t j = 0; j < kCharNames.size(); ++j) {
                            chars_x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                                bias_rows[i].chars[j];
                        }
                    }
                    const OlsFit bias_fit = ols_with_intercept(err, chars_x);
                    std::vector<double> bias_values, disp_values;
                    for (size_t i = 0; i < bias_rows.size(); ++i) {
                        double fitted = bias_fit.beta(0);
                        for (size_t j = 0; j < kCharNames.size(); ++j) {
                            fitted += bias_fit.beta(static_cast<Eigen::Index>(j) + 1) *
                                      bias_rows[i].chars[j];
                        }
                        bias_values.push_back(std::abs(fitted));
                        disp_values.push_back(bias_rows[i].dispersion);
                    }

                    auto quartile_groups = [&](const std::vector<double>& values) {
                        const double q1 = percentile_nearest_rank(values, 0.25);
                        const double q3 = percentile_nearest_rank(values, 0.75);
                        std::pair<std::set<FirmYear>, std::set<FirmYear>> groups;  // low, high
                        for (size_t i = 0; i < values.size(); ++i) {
                            if (values[i] <= q1) groups.first.insert(bias_rows[i].key);
                            else if (values[i] > q3) groups.second.insert(bias_rows[i].key);
                        }
                        return groups;
                    };
                    auto subsample_regression =
                        [&](const std::set<FirmYear>& members)
                        -> std::optional<PanelRegressionResult> {
                        std::vector<PanelRow> rows;
                        for (const auto& rec : records) {
                            if (!members.count(rec.key())) continue;
                            auto t2 = targets.find(rec.key());
                            if (t2 == targets.end()) continue;
                            const auto& gpt = sets.at("gpt_cot").entries;
                            const auto& an = sets.at("analyst_1m").entries;
                            if (!gpt.count(rec.key()) || !an.count(rec.key())) continue;
                            PanelRow r;
                            r.dep = t2->second;
                            r.regressors = {static_cast<double>(gpt.at(rec.key()).pred),
                                            static_cast<double>(an.at(rec.key()).pred)};
                            r.year = rec.fiscal_year;
                            r.industry = rec.industry_code;
                            rows.push_back(std::move(r));
                        }
                        if (rows.size() < 20) return std::nullopt;
                        return panel_ols(rows, {"gpt_cot", "analyst_1m"}, fe_opts);
                    };
                    auto stacked_interaction =
                        [&](const std::set<FirmYear>& low, const std::set<FirmYear>& high)
                        -> std::optional<PanelRegressionResult> {
                        std::vector<PanelRow> rows;
                        for (const auto& rec : records) {
                            const bool in_low = low.count(rec.key()) > 0;
                            const bool in_high = high.count(rec.key()) > 0;
                            if (!in_low && !in_high) continue;
                            auto t2 = targets.find(rec.key());
                            if (t2 == targets.end()) continue;
                            const auto& gpt = sets.at("gpt_cot").entries;
                            const auto& an = sets.at("analyst_1m").entries;
                            if (!gpt.count(rec.key()) || !an.count(rec.key())) continue;
                            const double g = gpt.at(rec.key()).pred;
                            const double a = an.at(rec.key()).pred;
                            const double h = in_high ? 1.0 : 0.0;
                            PanelRow r;
                            r.dep = t2->second;
                            r.regressors = {g, a, h, g * h, a * h};
                            r.year = rec.fiscal_year;
                            r.industry = rec.industry_code;
                            rows.push_back(std::move(r));
                        }
                        if (rows.size() < 40) return std::nullopt;
                        return panel_ols(rows,
                                         {"gpt_cot", "analyst_1m", "high", "gpt_x_high",
                                          "analyst_x_high"},
                                         fe_opts);
                    };

                    const auto [bias_low, bias_high] = quartile_groups(bias_values);
                    const auto [disp_low, disp_high] = quartile_groups(disp_values);
                    if (auto r = subsample_regression(bias_low))
                        emit("table3_panel_c", "bias_low", *r);
                    if (auto r = subsample_regression(bias_high))
                        emit("table3_panel_c", "bias_high", *r);
                    if (auto r = subsample_regression(disp_low))
                        emit("table3_panel_c", "dispersion_low", *r);
                    if (auto r = subsample_regression(disp_high))
                        emit("table3_panel_c", "dispersion_high", *r);
                    if (auto r = stacked_interaction(bias_low, bias_high))
                        emit("table3_panel_c", "bias_stacked", *r);
                    if (auto r = stacked_interaction(disp_low, disp_high))
                        emit("table3_panel_c", "dispersion_stacked", *r);
                }
            }
            t.write_file((fs::path(cfg.output_dir) / "reports" / "regressions.csv").string());
        }
        results["regressions"] = regressions;

        // ---- backtest -----------------------------------------------------------
        if (cfg.backtest.enabled) {
            fs::create_directories(fs::path(cfg.output_dir) / "backtest");
            const auto returns_rows = load_monthly_returns(cfg.returns_path);
            const ReturnsTable returns(returns_rows);
            const auto factors = load_factors(cfg.factors_path);

            std::map<int, std::vector<std::string>> universe_by_year;
            for (const auto& rec : records) {
                universe_by_year[rec.fiscal_year].push_back(rec.firm_id);
            }

            CsvTable panel_a({"method", "weighting", "leg", "ret_pct", "std_pct", "sharpe",
                              "n_months", "reference_ret_pct", "reference_std_pct",
                              "reference_sharpe"});
            CsvTable panel_b({"method", "weighting", "model", "alpha_pct", "t_stat",
                              "reference_alpha_pct"});
            json backtests = json::object();

            struct BtSpec {
                std::string label;   // gpt / ann / logit
                std::string method;  // prediction set name
                bool gpt_rule;
            };
            std::vector<BtSpec> bt_specs;
            if (sets.count("gpt_cot")) bt_specs.push_back({"gpt", "gpt_cot", true});
            if (sets.count("ann_op")) bt_specs.push_back({"ann", "ann_op", false});
            else if (sets.count("ann_fs")) bt_specs.push_back({"ann", "ann_fs", false});
            if (sets.count("logit")) bt_specs.push_back({"logit", "logit", false});

            for (const auto& spec : bt_specs) {
                std::vector<PortfolioLegs> legs;
                for (const auto& [year, universe] : universe_by_year) {
                    if (year < cfg.from_year || year > cfg.to_year) continue;
                    if (spec.gpt_rule) {
                        auto l = form_gpt_portfolio(sets.at(spec.method), universe, year);
                        if (!l.long_leg.empty()) legs.push_back(std::move(l));
                    } else {
                        if (auto l = form_decile_portfolio(sets.at(spec.method), year)) {
                            legs.push_back(std::move(*l));
                        }
                    }
                }
                if (legs.empty()) continue;
                for (const auto& weighting : cfg.backtest.weightings) {
                    BacktestOptions opt;
                    opt.weighting = weighting == "vw" ? Weighting::Value : Weighting::Equal;
                    opt.transaction_cost_bps = cfg.backtest.transaction_cost_bps;
                    opt.newey_west_lags = cfg.backtest.newey_west_lags;
                    BacktestResult bt = compute_returns(legs, returns, opt);
                    if (bt.hl_returns.size() >= 24) {
                        bt.alphas = fit_factor_alphas(bt.hl_returns, factors,
                                                      cfg.backtest.newey_west_lags);
                    } else {
                        bt.diagnostics.push_back(
                            strf("factor regressions skipped: only %zu overlapping months "
                                 "(need 24)",
                                 bt.hl_returns.size()));
                    }

                    const std::string key = spec.label + "_" + weighting;
                    const auto& refs = reference_backtest_benchmarks();
                    auto rit = refs.find(key);
                    auto add_leg = [&](const std::string& leg, const SeriesStats& s,
                                       bool is_hl) {
                        panel_a.append_row(
                            {spec.label, weighting, leg, strf("%.4f", s.mean),
                             strf("%.4f", s.stdev), strf("%.4f", s.sharpe),
                             std::to_string(s.n_months),
                             is_hl && rit != refs.end() ? strf("%.2f", rit->second.hl_ret) : "",
                             is_hl && rit != refs.end() ? strf("%.2f", rit->second.hl_std) : "",
                             is_hl && rit != refs.end() ? strf("%.2f", rit->second.hl_sharpe)
                                                        : ""});
                    };
                    add_leg("long", bt.long_stats, false);
                    add_leg("short", bt.short_stats, false);
                    add_leg("hl", bt.hl_stats, true);
                    if (opt.transaction_cost_bps > 0.0) {
                        add_leg("hl_after_costs", bt.hl_stats_after_costs, false);
                    }
                    for (const auto& a : bt.alphas) {
                        panel_b.append_row(
                            {spec.label, weighting, a.model, strf("%.4f", a.alpha),
                             strf("%.4f", a.t_stat),
                             rit != refs.end() && rit->second.hl_alphas.count(a.model)
                                 ? strf("%.2f", rit->second.hl_alphas.at(a.model))
                                 : ""});
                    }

                    // monthly + cumulative series
                    CsvTable monthly({"month", "long", "short", "hl"});
                    for (const auto& [m, hl] : bt.hl_returns) {
                        monthly.append_row({format_month(m),
                                            csv_number(bt.long_returns.at(m)),
                                            csv_number(bt.short_returns.at(m)),
                                            csv_number(hl)});
                    }
                    monthly.write_file((fs::path(cfg.output_dir) / "backtest" /
                                        (key + "_monthly.csv")).string());
                    CsvTable cum({"month", "cum_log_hl"});
                    std::vector<std::pair<double, double>> pts;
                    for (const auto& [m, v] : cumulative_log_returns(bt.hl_returns)) {
                        cum.append_row({format_month(m), csv_number(v)});
                        pts.push_back(
                            {static_cast<double>(m.year()) + (m.month() - 1) / 12.0, v});
                    }
                    cum.write_file((fs::path(cfg.output_dir) / "backtest" /
                                    (key + "_cumlog.csv")).string());
                    if (pts.size() >= 2) {
                        write_text_file((fs::path(cfg.output_dir) / "backtest" /
                                         (key + "_cumlog.svg")).string(),
                                        svg_line_chart(pts, "cumulative log H-L return: " + key,
                                                       "year", "cumulative log return"));
                    }

                    json bj;
                    bj["hl"] = {{"ret_pct", bt.hl_stats.mean},
                                {"std_pct", bt.hl_stats.stdev},
                                {"sharpe", bt.hl_stats.sharpe},
                                {"n_months", bt.hl_stats.n_months}};
                    for (const auto& a : bt.alphas) {
                        bj["alphas"][a.model] = {{"alpha_pct", a.alpha}, {"t", a.t_stat}};
                    }
                    for (const auto& d : bt.diagnostics) bj["diagnostics"].push_back(d);
                    backtests[key] = bj;
                }
            }
            panel_a.write_file(
                (fs::path(cfg.output_dir) / "reports" / "table8_panel_a.csv").string());
            panel_b.write_file(
                (fs::path(cfg.output_dir) / "reports" / "table8_panel_b.csv").string());
            results["backtests"] = backtests;
        }

        // ---- finalize ------------------------------------------------------------
        if (client) {
            result.provider_calls = client->provider_calls();
            result.parse_failures = client->parse_failures();
        }
        if (embedding_client) result.embedding_calls = embedding_client->provider_calls();

        std::sort(result.errors.begin(), result.errors.end());
        {
            json fails = json::array();
            for (const auto& e : result.errors) fails.push_back(e);
            diagnostics["prediction_failures"] = fails;
            results["prediction_failures"] = fails;
        }
        write_text_file((fs::path(cfg.output_dir) / "reports" / "results.json").string(),
                        results.dump(1) + "\n");
        write_text_file((fs::path(cfg.output_dir) / "diagnostics.json").string(),
                        diagnostics.dump(1) + "\n");
        for (const auto& [method, set] : sets) result.predictions[method] = set;
    } catch (const Error& e) {
        result.exit_code = 1;
        result.errors.push_back(e.what());
    }
    return result;
}

GuessProbeResult run_guess_probe(const ExperimentConfig& cfg, int sample_limit) {
    GuessProbeResult out;
    validate_config(cfg);
    fs::create_directories(cfg.output_dir);

    Panel panel = Panel::load(cfg.fundamentals_path);
    FilterOutcome filtered = apply_sample_filters(panel.records());
    std::vector<FirmYearRecord> records = filtered.kept;
    if (sample_limit > 0 && static_cast<int>(records.size()) > sample_limit) {
        records.resize(static_cast<size_t>(sample_limit));
    }

    AnonymityLexicon lexicon;
    if (!cfg.lexicon_path.empty()) lexicon = AnonymityLexicon::load(cfg.lexicon_path);
    auto provider = make_chat_provider(cfg.provider);
    RetryPolicy retry;
    retry.backoff_base_ms = cfg.provider.backoff_ms;
    ResponseCache cache(cfg.cache_dir.empty()
                            ? ""
                            : (fs::path(cfg.cache_dir) / "chat").string());
    LlmClient client(*provider, std::move(cache), lexicon, retry);

    std::map<int, long> sample_years;     // true fiscal year counts
    std::map<int, long> hits_by_year;     // correct year guesses by true year
    std::map<int, long> guesses_by_year;  // distribution of guessed years
    std::mutex mu;

    parallel_for(records.size(), cfg.provider.parallelism, [&](size_t i) {
        const auto& rec = records[i];
        StandardizedStatements s;
        try {
            s = standardize(rec);
        } catch (const Error& e) {
            std::lock_guard lock(mu);
            out.errors.push_back(to_string(rec.key()) + ": " + e.what());
            return;
        }
        PromptSpec spec;
        spec.kind = PromptKind::GuessIdentity;
        spec.statements_text = s.rendered_text;
        spec.model_name = cfg.provider.model;
        spec.tag = to_string(rec.key()) + ":guess_identity";
        GuessOutcome g = client.guess_identity(spec);
        std::lock_guard lock(mu);
        if (!g.response) {
            out.errors.push_back(to_string(rec.key()) + ": " + g.error);
            return;
        }
        ++out.n;
        ++sample_years[rec.fiscal_year];
        ++guesses_by_year[g.response->year_guess];
        if (auto rank = guess_rank(*g.response, rec.firm_id)) {
            if (*rank == 0) ++out.top1_hits;
            ++out.top10_hits;
        }
        if (g.response->year_guess == rec.fiscal_year) {
            ++out.year_hits;
            ++hits_by_year[rec.fiscal_year];
        }
    });

    // realized p (guess-share per year, zero off-support) and q (sample share)
    std::map<int, double> p, q;
    for (const auto& [year, n] : sample_years) {
        q[year] = static_cast<double>(n) / static_cast<double>(out.n);
        auto it = guesses_by_year.find(year);
        p[year] = it == guesses_by_year.end()
                      ? 0.0
                      : static_cast<double>(it->second) / static_cast<double>(out.n);
    }
    if (!q.empty()) out.random_guess_prob = random_guess_probability(p, q);

    json report;
    report["n"] = out.n;
    report["top1_hit_rate"] = out.n ? static_cast<double>(out.top1_hits) / out.n : 0.0;
    report["top10_hit_rate"] = out.n ? static_cast<double>(out.top10_hits) / out.n : 0.0;
    report["year_hit_rate"] = out.n ? static_cast<double>(out.year_hits) / out.n : 0.0;
    report["random_guess_probability"] = out.random_guess_prob;
    const auto ref = reference_guess_rates();
    report["reference"] = {{"firm_top1_pct", ref.firm_top1},
                           {"year_pct", ref.year},
                           {"random_guess_pct", ref.random_guess}};
    json year_guess_distribution = json::object();
    for (const auto& [year, n] : guesses_by_year) {
        year_guess_distribution[std::to_string(year)] =
            static_cast<double>(n) / std::max(1, out.n);
    }
    report["year_guess_distribution"] = year_guess_distribution;
    std::sort(out.errors.begin(), out.errors.end());
    report["errors"] = out.errors;
    write_text_file((fs::path(cfg.output_dir) / "guess_report.json").string(),
                    report.dump(1) + "\n");
    return out;
}

}  // namespace fsa
