#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fsa/fundamentals.hpp"
#include "fsa/pipeline.hpp"
#include "fsa/rng.hpp"
#include "fsa/synthetic.hpp"

using namespace fsa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("fsa_pipe_" + tag + "_" + std::to_string(Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig base_config(const fs::path& data, const fs::path& out) {
    ExperimentConfig cfg;
    cfg.seed = 9;
    cfg.from_year = 2001;
    cfg.to_year = 2004;
    cfg.fundamentals_path = (data / "fundamentals.csv").string();
    cfg.analysts_path = (data / "analysts.csv").string();
    cfg.returns_path = (data / "returns.csv").string();
    cfg.factors_path = (data / "factors.csv").string();
    cfg.output_dir = (out / "out").string();
    cfg.cache_dir = (out / "cache").string();
    cfg.recipe_path = std::string(FSA_SOURCE_DIR) + "/data/op_recipe.json";
    cfg.lexicon_path = std::string(FSA_SOURCE_DIR) + "/data/identifier_lexicon.txt";
    cfg.provider.kind = "mock";
    cfg.provider.scripted_responses = (data / "mock_responses.json").string();
    cfg.provider.parallelism = 3;
    cfg.provider.backoff_ms = 0;
    cfg.embedding.dimension = 16;
    cfg.methods = {"random_walk", "analyst_1m", "gpt_cot", "gpt_simple"};
    cfg.backtest.enabled = true;
    cfg.backtest.weightings = {"ew", "vw"};
    return cfg;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
    }
    return files;
}

}  // namespace

TEST_CASE("mock pipeline end to end, then a byte-identical warm-cache rerun") {
    TempDir data("data"), out("out");
    SynthParams params;
    params.n_firms = 30;
    params.first_year = 1996;
    params.last_year = 2005;
    params.seed = 4242;
    params.mock_accuracy = 0.65;
    params.mock_confidence_calibration = 0.8;
    generate_synthetic_universe(params, data.path.string());

    ExperimentConfig cfg = base_config(data.path, out.path);
    const PipelineResult first = run_pipeline(cfg);
    REQUIRE(first.exit_code == 0);
    CHECK(first.provider_calls > 0);
    CHECK(first.parse_failures == 0);

    // table-shaped reports and prediction dumps exist
    const fs::path reports = fs::path(cfg.output_dir) / "reports";
    for (const char* name : {"table2.csv", "table4_panel_a.csv", "table5.csv",
                             "table8_panel_a.csv", "table8_panel_b.csv", "results.json",
                             "regressions.csv", "accuracy_by_year.csv"}) {
        CHECK(fs::exists(reports / name));
    }
    CHECK(fs::exists(fs::path(cfg.output_dir) / "predictions" / "gpt_cot.csv"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "backtest" / "gpt_ew_monthly.csv"));

    // scores came out for every requested method
    for (const char* m : {"random_walk", "analyst_1m", "gpt_cot", "gpt_simple"}) {
        CHECK(first.scores.count(m));
    }

    const auto tree_first = read_tree(cfg.output_dir);

    // warm rerun: zero provider calls, byte-identical bundle
    const PipelineResult second = run_pipeline(cfg);
    REQUIRE(second.exit_code == 0);
    CHECK(second.provider_calls == 0);
    const auto tree_second = read_tree(cfg.output_dir);
    REQUIRE(tree_first.size() == tree_second.size());
    for (const auto& [rel, content] : tree_first) {
        CHECK(tree_second.at(rel) == content);
    }
}

TEST_CASE("calibrated mock confidence separates the quartiles") {
    TempDir data("conf"), out("out");
    SynthParams params;
    params.n_firms = 40;
    params.first_year = 1998;
    params.last_year = 2005;
    params.seed = 777;
    params.mock_accuracy = 0.55;
    params.mock_confidence_calibration = 1.0;
    generate_synthetic_universe(params, data.path.string());

    ExperimentConfig cfg = base_config(data.path, out.path);
    cfg.methods = {"gpt_cot"};
    cfg.backtest.enabled = false;
    const PipelineResult result = run_pipeline(cfg);
    REQUIRE(result.exit_code == 0);

    const Panel panel = Panel::load(cfg.fundamentals_path);
    const auto targets = target_map(build_target(panel));
    const auto groups =
        partition_report(result.predictions.at("gpt_cot"), targets,
                         PartitionKey::ConfidenceQuartile);
    double q1 = -1.0, q4 = -1.0;
    for (const auto& g : groups) {
        if (g.label == "Q1") q1 = g.accuracy;
        if (g.label == "Q4") q4 = g.accuracy;
    }
    REQUIRE(q1 >= 0.0);
    REQUIRE(q4 >= 0.0);
    CHECK(q4 > q1);
    CHECK(q4 > 0.9);  // fully calibrated confidence: top quartile almost all correct
    CHECK(q1 < 0.2);
}

TEST_CASE("embedding and dual models run through the pipeline") {
    TempDir data("emb"), out("out");
    SynthParams params;
    params.n_firms = 24;
    params.first_year = 1996;
    params.last_year = 2004;
    params.seed = 31;
    generate_synthetic_universe(params, data.path.string());

    ExperimentConfig cfg = base_config(data.path, out.path);
    cfg.methods = {"ann_fs", "embed_ann", "dual_ann", "embed_ablations"};
    cfg.from_year = 2001;
    cfg.to_year = 2003;
    cfg.backtest.enabled = false;
    cfg.mlp_max_epochs = 3;
    cfg.mlp_learning_rates = {1e-3};
    cfg.mlp_dropouts = {0.0};
    const PipelineResult result = run_pipeline(cfg);
    REQUIRE(result.exit_code == 0);
    CHECK(result.embedding_calls > 0);
    for (const char* m : {"ann_fs", "embed_ann", "dual_ann", "embed_ann_excl_trend",
                          "embed_ann_excl_ratio", "embed_ann_excl_rationale"}) {
        REQUIRE(result.predictions.count(m));
    }
    // every ablation is evaluated on exactly the same firm-years as the full model
    const auto& full = result.predictions.at("embed_ann").entries;
    for (const char* m :
         {"embed_ann_excl_trend", "embed_ann_excl_ratio", "embed_ann_excl_rationale"}) {
        const auto& abl = result.predictions.at(m).entries;
        REQUIRE(abl.size() == full.size());
        auto it = full.begin();
        for (const auto& [key, e] : abl) {
            CHECK(key == it->first);
            ++it;
        }
    }
    CHECK(fs::exists(fs::path(cfg.output_dir) / "reports" / "table7.csv"));
}

TEST_CASE("config validation: missing files only matter for enabled stages") {
    TempDir data("val"), out("out");
    SynthParams params;
    params.n_firms = 6;
    params.first_year = 2000;
    params.last_year = 2003;
    params.seed = 1;
    generate_synthetic_universe(params, data.path.string());

    ExperimentConfig cfg = base_config(data.path, out.path);
    cfg.methods = {"random_walk"};
    cfg.returns_path = (data.path / "does_not_exist.csv").string();

    SUBCASE("backtest enabled with missing returns fails validation") {
        cfg.backtest.enabled = true;
        const PipelineResult r = run_pipeline(cfg);
        CHECK(r.exit_code == 2);
    }
    SUBCASE("backtest disabled with missing returns succeeds") {
        cfg.backtest.enabled = false;
        const PipelineResult r = run_pipeline(cfg);
        CHECK(r.exit_code == 0);
        CHECK(r.scores.count("random_walk"));
    }
    SUBCASE("empty year range is a validation error") {
        cfg.backtest.enabled = false;
        cfg.from_year = 2005;
        cfg.to_year = 2001;
        const PipelineResult r = run_pipeline(cfg);
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("config JSON parsing with overrides and relative paths") {
    TempDir tmp("cfg");
    const std::string json_text = R"({
        "seed": 5,
        "years": {"from": 2000, "to": 2002},
        "data": {"fundamentals": "fun.csv"},
        "methods": ["random_walk"],
        "flags": {"stepwise_alpha": 0.10},
        "backtest": {"enabled": false}
    })";
    const ExperimentConfig cfg = config_from_json(json_text, tmp.path.string());
    CHECK(cfg.seed == 5);
    CHECK(cfg.stepwise_alpha == 0.10);
    CHECK(cfg.fundamentals_path == (tmp.path / "fun.csv").lexically_normal().string());
    CHECK_FALSE(cfg.backtest.enabled);
    CHECK_THROWS_AS(config_from_json("{}", ""), Error);
    CHECK_THROWS_AS(config_from_json(R"({"seed": 1})", ""), Error);
}

TEST_CASE("partial provider failures leave the pipeline running on the rest") {
    TempDir data("partial"), out("out");
    SynthParams params;
    params.n_firms = 10;
    params.first_year = 1998;
    params.last_year = 2004;
    params.seed = 66;
    generate_synthetic_universe(params, data.path.string());

    // strip the scripted responses for one firm: those requests now fail
    {
        std::ifstream in(data.path / "mock_responses.json");
        nlohmann::json j;
        in >> j;
        auto& responses = j["responses"];
        for (auto it = responses.begin(); it != responses.end();) {
            if (it.key().rfind("F0001:", 0) == 0) it = responses.erase(it);
            else ++it;
        }
        std::ofstream outf(data.path / "mock_responses.json");
        outf << j.dump();
    }

    ExperimentConfig cfg = base_config(data.path, out.path);
    cfg.methods = {"gpt_cot"};
    cfg.from_year = 2000;
    cfg.to_year = 2003;
    cfg.backtest.enabled = false;
    const PipelineResult result = run_pipeline(cfg);
    CHECK(result.exit_code == 0);  // partial failure is not structural
    CHECK_FALSE(result.errors.empty());
    for (const auto& e : result.errors) {
        CHECK(e.find("F0001") != std::string::npos);
    }
    REQUIRE(result.predictions.count("gpt_cot"));
    CHECK_FALSE(result.predictions.at("gpt_cot").entries.empty());
    for (const auto& [key, e] : result.predictions.at("gpt_cot").entries) {
        CHECK(key.firm_id != "F0001");
    }
    // the failures are itemized in the machine-readable results
    const std::string results_json =
        slurp(fs::path(cfg.output_dir) / "reports" / "results.json");
    CHECK(results_json.find("prediction_failures") != std::string::npos);
    CHECK(results_json.find("F0001") != std::string::npos);
}

TEST_CASE("guess probe over the scripted mock") {
    TempDir data("guess"), out("out");
    SynthParams params;
    params.n_firms = 15;
    params.first_year = 1999;
    params.last_year = 2004;
    params.seed = 12;
    generate_synthetic_universe(params, data.path.string());

    ExperimentConfig cfg = base_config(data.path, out.path);
    cfg.methods = {"gpt_cot"};
    cfg.backtest.enabled = false;
    const GuessProbeResult probe = run_guess_probe(cfg, 40);
    REQUIRE(probe.n > 0);
    CHECK(probe.errors.empty());
    // the scripted guesses list famous names, never the synthetic ids
    CHECK(probe.top1_hits == 0);
    CHECK(probe.top10_hits == 0);
    // scripted year guesses are 2019-2021, outside the synthetic range
    CHECK(probe.year_hits == 0);
    CHECK(probe.random_guess_prob == doctest::Approx(0.0));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "guess_report.json"));
}
