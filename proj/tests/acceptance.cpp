// Acceptance suite: every criterion runs at its stated tolerance and prints
// one pass/fail line. The binary exits nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsa/backtest.hpp"
#include "fsa/baselines.hpp"
#include "fsa/evaluation.hpp"
#include "fsa/features.hpp"
#include "fsa/fundamentals.hpp"
#include "fsa/llm_client.hpp"
#include "fsa/logistic.hpp"
#include "fsa/mlp.hpp"
#include "fsa/panel_ols.hpp"
#include "fsa/pipeline.hpp"
#include "fsa/rng.hpp"
#include "fsa/statements.hpp"
#include "fsa/synthetic.hpp"
#include "oracles.hpp"

using namespace fsa;
namespace fs = std::filesystem;

namespace {

const std::string kSourceDir = FSA_SOURCE_DIR;

struct Criterion {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& message) {
        if (!ok) failures.push_back(message);
    }
    template <typename... Args>
    void requiref(bool ok, const char* fmt, Args... args) {
        if (!ok) failures.push_back(strf(fmt, args...));
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("fsa_acceptance_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

FirmYearRecord golden_record() {
    const Panel panel = Panel::load(kSourceDir + "/data/fixtures/sample_firm.csv");
    const FirmYearRecord* rec = panel.record({"SAMPLE", 2005});
    if (!rec) throw Error("golden fixture record missing");
    return *rec;
}

PredictionSet restrict_to(const PredictionSet& p, const std::set<FirmYear>& keys) {
    PredictionSet out;
    out.method = p.method;
    for (const auto& [key, e] : p.entries) {
        if (keys.count(key)) out.entries[key] = e;
    }
    return out;
}

// ---------------------------------------------------------------------------
// 01 golden rendering
// ---------------------------------------------------------------------------
void criterion_01(Criterion& c) {
    const auto s = standardize(golden_record());
    const std::string golden = slurp(kSourceDir + "/data/golden/sample_firm_rendering.txt");
    c.require(s.rendered_text == golden, "rendering differs from the golden file");
    c.require(s.rendered_text.find("Total Asset  843.132  787.567") != std::string::npos,
              "total-asset row missing or wrong");
    c.require(s.rendered_text.find("Earnings per Share - Basic Excluding Extraordinary Items"
                                   "  1.47  0.54  3.82") != std::string::npos,
              "EPS row missing or wrong");
    c.require(s.balance_sheet.size() == 26, "balance sheet template width");
    c.require(s.income_statement.size() == 27, "income statement template width");
}

// ---------------------------------------------------------------------------
// 02 identity suite over 1,000 rendered records + anonymity injections
// ---------------------------------------------------------------------------
void criterion_02(Criterion& c) {
    const fs::path dir = scratch_dir("identity");
    SynthParams params;
    params.n_firms = 100;
    params.first_year = 1994;
    params.last_year = 2005;  // 10 records per firm
    params.seed = 77;
    params.emit_mock_responses = false;
    generate_synthetic_universe(params, dir.string());
    const Panel panel = Panel::load((dir / "fundamentals.csv").string());
    const auto outcome = apply_sample_filters(panel.records());
    c.requiref(outcome.kept.size() >= 1000, "only %zu records generated", outcome.kept.size());
    c.requiref(outcome.rejected.empty(), "%zu synthetic records rejected",
               outcome.rejected.size());

    const AnonymityLexicon lexicon =
        AnonymityLexicon::load(kSourceDir + "/data/identifier_lexicon.txt");
    Rng rng(5);
    size_t checked = 0;
    const size_t at_i = balance_sheet_index("at");
    const size_t lt_i = balance_sheet_index("lt");
    const size_t teq_i = balance_sheet_index("teq");
    const size_t sale_i = income_statement_index("sale");
    const size_t cogs_i = income_statement_index("cogs");
    const size_t gp_i = income_statement_index("gp");
    const size_t xsga_i = income_statement_index("xsga");
    const size_t oibdp_i = income_statement_index("oibdp");
    const size_t dp_i = income_statement_index("dp");
    const size_t oiadp_i = income_statement_index("oiadp");

    for (const auto& rec : outcome.kept) {
        if (checked >= 1000) break;
        ++checked;
        const auto s = standardize(rec);

        // parse the rendered numbers back; identities must hold at printed
        // precision
        std::istringstream in(s.rendered_text);
        std::string line;
        std::vector<std::vector<double>> bs_rows, is_rows;
        bool income = false;
        while (std::getline(in, line)) {
            if (line.empty() || line == "Balance Sheet" || line.rfind("Account Items", 0) == 0)
                continue;
            if (line == "Income Statement") {
                income = true;
                continue;
            }
            std::vector<double> nums;
            std::istringstream rest(line.substr(line.find("  ")));
            double v;
            while (rest >> v) nums.push_back(v);
            (income ? is_rows : bs_rows).push_back(nums);
        }
        if (bs_rows.size() != 26 || is_rows.size() != 27) {
            c.failures.push_back("parsed row counts wrong");
            continue;
        }
        for (int col = 0; col < 2; ++col) {
            const double at = bs_rows[at_i][static_cast<size_t>(col)];
            const double lt_teq = bs_rows[lt_i][static_cast<size_t>(col)] +
                                  bs_rows[teq_i][static_cast<size_t>(col)];
            c.requiref(std::abs(at - lt_teq) <= 1e-3 + 1e-9,
                       "balance identity violated post-render for %s %d", rec.firm_id.c_str(),
                       rec.fiscal_year);
        }
        for (int col = 0; col < 3; ++col) {
            const size_t k = static_cast<size_t>(col);
            c.require(std::abs(is_rows[gp_i][k] - (is_rows[sale_i][k] - is_rows[cogs_i][k])) <=
                          1e-3 + 1e-9,
                      "gross-profit roll-up violated post-render");
            c.require(std::abs(is_rows[oibdp_i][k] -
                               (is_rows[gp_i][k] - is_rows[xsga_i][k])) <= 1e-3 + 1e-9,
                      "operating-income roll-up violated post-render");
            c.require(std::abs(is_rows[oiadp_i][k] -
                               (is_rows[oibdp_i][k] - is_rows[dp_i][k])) <= 1e-3 + 1e-9,
                      "post-depreciation roll-up violated post-render");
        }

        if (!verify_anonymity(s.rendered_text, lexicon)) {
            c.failures.push_back("clean rendering rejected by the anonymity checker");
        }
        static const char* kInjections[] = {"Tesla", "TSLA", "2021", "1987", "Exxon Mobil"};
        const char* token = kInjections[rng.uniform_int(5)];
        std::string tainted = s.rendered_text;
        const size_t line_break = tainted.find('\n', rng.uniform_int(tainted.size() / 2));
        tainted.insert(line_break == std::string::npos ? tainted.size() : line_break,
                       std::string(" ") + token);
        c.requiref(!verify_anonymity(tainted, lexicon),
                   "anonymity checker missed injected token '%s'", token);
    }
    c.requiref(checked >= 1000, "only %zu records checked", checked);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 03 accuracy / F1 / AUC against brute-force oracles
// ---------------------------------------------------------------------------
void criterion_03(Criterion& c) {
    Rng rng(909);
    for (int set = 0; set < 500; ++set) {
        const size_t n = 50 + rng.uniform_int(250);
        std::vector<int> pred(n), actual(n);
        std::vector<double> scores(n);
        for (size_t i = 0; i < n; ++i) {
            actual[i] = rng.uniform() < 0.5 ? 1 : 0;
            pred[i] = rng.uniform() < 0.6 ? actual[i] : 1 - actual[i];
            scores[i] = std::round(rng.uniform() * 50.0) / 50.0;  // forces ties
        }
        std::vector<std::pair<int, int>> pairs;
        for (size_t i = 0; i < n; ++i) pairs.emplace_back(pred[i], actual[i]);
        const ScoreResult s = score_pairs(pairs);
        c.require(std::abs(s.accuracy - oracle::accuracy(pred, actual)) <= 1e-12,
                  "accuracy deviates from the counting oracle");
        c.require(std::abs(s.f1 - oracle::f1(pred, actual)) <= 1e-12,
                  "F1 deviates from the counting oracle");
        bool both = false;
        for (size_t i = 1; i < n && !both; ++i) both = actual[i] != actual[0];
        if (both) {
            const double fast = *auc(scores, actual);
            c.require(std::abs(fast - oracle::auc_pairwise(scores, actual)) <= 1e-12,
                      "AUC deviates from the pairwise oracle");
        }
    }
}

// ---------------------------------------------------------------------------
// 04 gradient check at full architecture sizes
// ---------------------------------------------------------------------------
void criterion_04(Criterion& c) {
    auto check_architecture = [&c](int input_dim, uint64_t seed, const char* label) {
        Rng rng(seed);
        Eigen::MatrixXd x(5, input_dim);
        Eigen::VectorXi y(5);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < input_dim; ++j) x(i, j) = rng.normal();
            y(i) = static_cast<int>(rng.uniform_int(2));
        }
        Mlp net(input_dim, 256, 64);
        net.init(seed);
        Eigen::VectorXd grad;
        net.loss_and_gradients(x, y, grad);
        const double h = 1e-5;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
            const double orig = net.get_parameter(i);
            net.set_parameter(i, orig + h);
            const double up = net.loss(x, y);
            net.set_parameter(i, orig - h);
            const double down = net.loss(x, y);
            net.set_parameter(i, orig);
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(grad(i)), std::abs(fd), 1e-3});
            worst = std::max(worst, std::abs(grad(i) - fd) / denom);
        }
        c.requiref(worst < 1e-4, "%s: max relative gradient error %.3e", label, worst);
    };
    check_architecture(59, 1001, "59-input architecture");
    check_architecture(32, 2002, "embedding-input architecture (mock width 32)");
}

// ---------------------------------------------------------------------------
// 05 logistic oracle + stepwise Monte Carlo
// ---------------------------------------------------------------------------
void criterion_05(Criterion& c) {
    {
        Rng rng(5150);
        Eigen::MatrixXd x(200, 5);
        Eigen::VectorXi y(200);
        std::vector<std::vector<double>> xo(200, std::vector<double>(5));
        std::vector<int> yo(200);
        for (int i = 0; i < 200; ++i) {
            double eta = 0.2;
            for (int j = 0; j < 5; ++j) {
                x(i, j) = rng.normal();
                xo[static_cast<size_t>(i)][static_cast<size_t>(j)] = x(i, j);
                eta += (j % 2 == 0 ? 0.8 : -0.6) * x(i, j);
            }
            y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
            yo[static_cast<size_t>(i)] = y(i);
        }
        const LogisticModel m = fit_logistic(x, y);
        const auto beta = oracle::logistic_newton(xo, yo);
        for (int j = 0; j < 6; ++j) {
            c.requiref(std::abs(m.beta(j) - beta[static_cast<size_t>(j)]) <= 1e-6,
                       "IRLS coefficient %d deviates from the Newton oracle by %.3e", j,
                       std::abs(m.beta(j) - beta[static_cast<size_t>(j)]));
        }
    }
    {
        int all_retained = 0;
        for (int run = 0; run < 100; ++run) {
            Rng rng(derive_seed(616, static_cast<uint64_t>(run)));
            const int n = 5000, k = 59;
            Eigen::MatrixXd x(n, k);
            Eigen::VectorXi y(n);
            for (int i = 0; i < n; ++i) {
                double eta = 0.0;
                for (int j = 0; j < k; ++j) {
                    x(i, j) = rng.normal();
                    if (j < 5) eta += 0.5 * (j % 2 == 0 ? 1.0 : -1.0) * x(i, j);
                }
                y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
            }
            const StepwiseModel m = fit_stepwise_logistic(x, y, 0.05);
            bool ok = true;
            for (int j = 0; j < 5; ++j) {
                ok = ok &&
                     std::find(m.selected.begin(), m.selected.end(), j) != m.selected.end();
            }
            all_retained += ok ? 1 : 0;
        }
        c.requiref(all_retained >= 95, "informative predictors fully retained in %d/100 runs",
                   all_retained);
    }
}

// ---------------------------------------------------------------------------
// 06 no-lookahead over a 20-year panel, both trainers
// ---------------------------------------------------------------------------
void criterion_06(Criterion& c) {
    const fs::path dir = scratch_dir("lookahead");
    SynthParams params;
    params.n_firms = 25;
    params.first_year = 1990;
    params.last_year = 2009;
    params.seed = 4;
    params.emit_mock_responses = false;
    generate_synthetic_universe(params, dir.string());
    const Panel panel = Panel::load((dir / "fundamentals.csv").string());
    const auto outcome = apply_sample_filters(panel.records());
    const auto targets = target_map(build_target(panel));
    const FeatureRecipe recipe = FeatureRecipe::load(kSourceDir + "/data/op_recipe.json");
    FeatureMatrix features = assemble_op_matrix(outcome.kept, recipe);
    impute_year_industry(features);

    RollingConfig cfg;
    cfg.from_year = 1990;
    cfg.to_year = 2009;
    cfg.seed = 1;
    cfg.mlp.max_epochs = 2;  // hyperparameters do not affect window discipline
    cfg.learning_rates = {1e-3};
    cfg.dropouts = {0.0};

    const MethodRun logit_run = run_rolling_logit(features, targets, cfg);
    const MethodRun mlp_run = run_rolling_mlp(features, targets, cfg);
    c.require(!logit_run.windows.empty() && !mlp_run.windows.empty(), "no windows trained");
    for (const auto* run : {&logit_run, &mlp_run}) {
        for (const auto& w : run->windows) {
            c.requiref(w.window.train_years.size() == 5, "window %d has %zu train years",
                       w.window.test_year, w.window.train_years.size());
            for (int year : w.train_observation_years) {
                if (year >= w.window.test_year) {
                    c.failures.push_back(strf("training observation from %d inside window %d",
                                              year, w.window.test_year));
                }
            }
        }
    }
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// 07 end-to-end synthetic run: predictable vs null DGP
// ---------------------------------------------------------------------------
void criterion_07(Criterion& c) {
    BootstrapOptions boot;
    boot.draws = 1000;
    boot.draw_size = 1000;

    // predictable DGP: strong margin mean reversion + observable signal
    {
        const fs::path dir = scratch_dir("predictable");
        SynthParams params;
        params.n_firms = 120;
        params.first_year = 1993;
        params.last_year = 2008;
        params.seed = 29;
        params.mean_reversion = 0.7;
        params.signal_strength = 1.5;
        params.margin_noise = 0.012;
        params.emit_mock_responses = false;
        generate_synthetic_universe(params, dir.string());

        const Panel panel = Panel::load((dir / "fundamentals.csv").string());
        const auto outcome = apply_sample_filters(panel.records());
        const auto targets = target_map(build_target(panel));

        FeatureMatrix fs_features = assemble_fs_matrix(outcome.kept);
        impute_year_industry(fs_features);
        RollingConfig cfg;
        cfg.from_year = 2000;
        cfg.to_year = 2007;
        cfg.seed = 11;
        const MethodRun mlp_run = run_rolling_mlp(fs_features, targets, cfg);
        const PredictionSet rw = run_random_walk(outcome.kept);

        std::set<FirmYear> common;
        for (const auto& [key, e] : mlp_run.predictions.entries) {
            if (rw.entries.count(key) && targets.count(key)) common.insert(key);
        }
        c.requiref(common.size() >= 500, "only %zu common firm-years", common.size());
        const PredictionSet mlp_c = restrict_to(mlp_run.predictions, common);
        const PredictionSet rw_c = restrict_to(rw, common);

        boot.seed = 100;
        const auto mlp_ci = bootstrap_ci(MetricKind::Accuracy, mlp_c, targets, boot);
        boot.seed = 101;
        const auto rw_ci = bootstrap_ci(MetricKind::Accuracy, rw_c, targets, boot);
        c.requiref(mlp_ci.point - rw_ci.point >= 0.05,
                   "MLP %.4f vs random walk %.4f: gap below 5pp", mlp_ci.point, rw_ci.point);
        c.requiref(mlp_ci.low > rw_ci.high,
                   "confidence intervals overlap: mlp [%.4f, %.4f], rw [%.4f, %.4f]",
                   mlp_ci.low, mlp_ci.high, rw_ci.low, rw_ci.high);
        fs::remove_all(dir);
    }

    // null DGP: every method's accuracy interval covers 50%
    {
        const fs::path dir = scratch_dir("null");
        SynthParams params;
        params.n_firms = 120;
        params.first_year = 1993;
        params.last_year = 2008;
        params.seed = 37;
        params.mean_reversion = 0.0;
        params.signal_strength = 0.0;
        params.sales_growth_mean = 0.0;
        params.return_signal = 0.0;
        params.emit_mock_responses = false;
        generate_synthetic_universe(params, dir.string());

        const Panel panel = Panel::load((dir / "fundamentals.csv").string());
        const auto outcome = apply_sample_filters(panel.records());
        const auto targets = target_map(build_target(panel));

        const FeatureRecipe recipe = FeatureRecipe::load(kSourceDir + "/data/op_recipe.json");
        FeatureMatrix op = assemble_op_matrix(outcome.kept, recipe);
        impute_year_industry(op);
        FeatureMatrix fsm = assemble_fs_matrix(outcome.kept);
        impute_year_industry(fsm);

        RollingConfig cfg;
        cfg.from_year = 2000;
        cfg.to_year = 2007;
        cfg.seed = 12;
        const MethodRun logit_run = run_rolling_logit(op, targets, cfg);
        const MethodRun mlp_run = run_rolling_mlp(fsm, targets, cfg);
        const PredictionSet rw = run_random_walk(outcome.kept);

        int idx = 0;
        for (const PredictionSet* set : {&rw, &logit_run.predictions, &mlp_run.predictions}) {
            boot.seed = 200 + static_cast<uint64_t>(idx++);
            const auto ci = bootstrap_ci(MetricKind::Accuracy, *set, targets, boot);
            c.requiref(ci.low <= 0.5 && 0.5 <= ci.high,
                       "%s accuracy interval [%.4f, %.4f] misses 50%% under the null DGP",
                       set->method.c_str(), ci.low, ci.high);
        }
        fs::remove_all(dir);
    }
}

// ---------------------------------------------------------------------------
// 08 mock-LLM pipeline: shaped reports, example payload, warm-cache rerun
// ---------------------------------------------------------------------------
void criterion_08(Criterion& c) {
    // the example payload parses to (increase, moderate, 0.7)
    {
        const ChatResponse chat =
            parse_chat_payload(slurp(kSourceDir + "/data/fixtures/example_cot_response.json"));
        const CotResponse r = parse_cot_response(chat, PromptKind::Cot);
        c.require(r.direction == Direction::Increase, "example direction");
        c.require(r.magnitude == Magnitude::Moderate, "example magnitude");
        c.require(r.confidence && std::abs(*r.confidence - 0.7) < 1e-12, "example confidence");
    }

    const fs::path data = scratch_dir("pipe_data");
    const fs::path work = scratch_dir("pipe_work");
    SynthParams params;
    params.n_firms = 30;
    params.first_year = 1996;
    params.last_year = 2005;
    params.seed = 4242;
    params.mock_accuracy = 0.65;
    params.mock_confidence_calibration = 0.8;
    generate_synthetic_universe(params, data.string());

    ExperimentConfig cfg;
    cfg.seed = 9;
    cfg.from_year = 2001;
    cfg.to_year = 2004;
    cfg.fundamentals_path = (data / "fundamentals.csv").string();
    cfg.analysts_path = (data / "analysts.csv").string();
    cfg.returns_path = (data / "returns.csv").string();
    cfg.factors_path = (data / "factors.csv").string();
    cfg.output_dir = (work / "out").string();
    cfg.cache_dir = (work / "cache").string();
    cfg.recipe_path = kSourceDir + "/data/op_recipe.json";
    cfg.lexicon_path = kSourceDir + "/data/identifier_lexicon.txt";
    cfg.provider.kind = "mock";
    cfg.provider.scripted_responses = (data / "mock_responses.json").string();
    cfg.provider.parallelism = 4;
    cfg.provider.backoff_ms = 0;
    cfg.methods = {"random_walk", "analyst_1m", "logit", "gpt_cot", "gpt_simple"};
    cfg.backtest.enabled = true;
    cfg.backtest.weightings = {"ew"};

    const PipelineResult first = run_pipeline(cfg);
    c.requiref(first.exit_code == 0, "pipeline exit code %d", first.exit_code);
    c.require(first.provider_calls > 0, "cold run made no provider calls");
    c.require(first.parse_failures == 0, "scripted payloads failed to parse");
    for (const char* rel :
         {"reports/table2.csv", "reports/table4_panel_a.csv", "reports/table5.csv",
          "reports/table8_panel_a.csv", "reports/table8_panel_b.csv", "reports/results.json"}) {
        c.requiref(fs::exists(fs::path(cfg.output_dir) / rel), "missing report %s", rel);
    }

    std::map<std::string, std::string> tree;
    for (const auto& entry : fs::recursive_directory_iterator(cfg.output_dir)) {
        if (entry.is_regular_file()) {
            tree[fs::relative(entry.path(), cfg.output_dir).string()] = slurp(entry.path());
        }
    }
    const PipelineResult second = run_pipeline(cfg);
    c.requiref(second.exit_code == 0, "warm rerun exit code %d", second.exit_code);
    c.requiref(second.provider_calls == 0, "warm rerun made %d provider calls",
               second.provider_calls);
    size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(cfg.output_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), cfg.output_dir).string();
        ++compared;
        auto it = tree.find(rel);
        if (it == tree.end()) {
            c.failures.push_back("new file appeared on rerun: " + rel);
        } else if (it->second != slurp(entry.path())) {
            c.failures.push_back("report not byte-identical on warm rerun: " + rel);
        }
    }
    c.require(compared == tree.size(), "file set changed on rerun");
    fs::remove_all(data);
    fs::remove_all(work);
}

// ---------------------------------------------------------------------------
// 09 confidence partition under a calibrated mock
// ---------------------------------------------------------------------------
void criterion_09(Criterion& c) {
    const fs::path data = scratch_dir("conf_data");
    const fs::path work = scratch_dir("conf_work");
    SynthParams params;
    params.n_firms = 40;
    params.first_year = 1998;
    params.last_year = 2005;
    params.seed = 777;
    params.mock_accuracy = 0.55;
    params.mock_confidence_calibration = 1.0;
    generate_synthetic_universe(params, data.string());

    ExperimentConfig cfg;
    cfg.seed = 3;
    cfg.from_year = 2000;
    cfg.to_year = 2004;
    cfg.fundamentals_path = (data / "fundamentals.csv").string();
    cfg.output_dir = (work / "out").string();
    cfg.cache_dir = (work / "cache").string();
    cfg.lexicon_path = kSourceDir + "/data/identifier_lexicon.txt";
    cfg.provider.kind = "mock";
    cfg.provider.scripted_responses = (data / "mock_responses.json").string();
    cfg.provider.backoff_ms = 0;
    cfg.methods = {"gpt_cot"};
    cfg.backtest.enabled = false;

    const PipelineResult result = run_pipeline(cfg);
    c.requiref(result.exit_code == 0, "pipeline exit code %d", result.exit_code);
    const Panel panel = Panel::load(cfg.fundamentals_path);
    const auto targets = target_map(build_target(panel));
    const auto groups = partition_report(result.predictions.at("gpt_cot"), targets,
                                         PartitionKey::ConfidenceQuartile);
    double q1 = -1.0, q4 = -1.0;
    for (const auto& g : groups) {
        if (g.label == "Q1") q1 = g.accuracy;
        if (g.label == "Q4") q4 = g.accuracy;
    }
    c.require(q1 >= 0.0 && q4 >= 0.0, "missing quartile groups");
    c.requiref(q4 > q1, "Q4 accuracy %.4f not above Q1 accuracy %.4f", q4, q1);
    fs::remove_all(data);
    fs::remove_all(work);
}

// ---------------------------------------------------------------------------
// 10 backtest oracles
// ---------------------------------------------------------------------------
void criterion_10(Criterion& c) {
    Rng rng(1303);

    // leg membership vs full-sort oracles on 1,000 random inputs
    for (int trial = 0; trial < 1000; ++trial) {
        const int universe_size = 30 + static_cast<int>(rng.uniform_int(60));
        PredictionSet gpt, prob;
        gpt.method = "gpt_cot";
        prob.method = "logit";
        std::vector<std::string> universe;
        std::vector<std::pair<std::string, double>> elig_long, elig_short, scored;
        for (int i = 0; i < universe_size; ++i) {
            const std::string firm = strf("F%03d", i);
            universe.push_back(firm);
            PredEntry e;
            e.pred = rng.uniform() < 0.5 ? 1 : 0;
            const int mag = static_cast<int>(rng.uniform_int(3));
            e.magnitude = mag == 0 ? Magnitude::Large
                                   : (mag == 1 ? Magnitude::Moderate : Magnitude::Small);
            e.mean_logprob = -std::round(rng.uniform() * 50.0) / 50.0;  // ties likely
            gpt.entries[{firm, 2000}] = e;
            if (*e.magnitude != Magnitude::Small) {
                auto& side = e.pred == 1 ? elig_long : elig_short;
                side.emplace_back(firm, *e.mean_logprob);
            }
            PredEntry pe;
            pe.score = std::round(rng.uniform() * 20.0) / 20.0;
            pe.pred = *pe.score > 0.5 ? 1 : 0;
            prob.entries[{firm, 2000}] = pe;
            scored.emplace_back(firm, *pe.score);
        }
        // oracle for the confidence-sorted rule
        auto sort_desc = [](std::vector<std::pair<std::string, double>>& v) {
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
        };
        sort_desc(elig_long);
        sort_desc(elig_short);
        const size_t quota = static_cast<size_t>(0.10 * universe_size);
        const size_t take = std::min({quota, elig_long.size(), elig_short.size()});
        const auto legs = form_gpt_portfolio(gpt, universe, 2000);
        c.requiref(legs.long_leg.size() == take && legs.short_leg.size() == take,
                   "trial %d: leg sizes %zu/%zu, expected %zu", trial, legs.long_leg.size(),
                   legs.short_leg.size(), take);
        for (size_t i = 0; i < take; ++i) {
            if (legs.long_leg[i] != elig_long[i].first) {
                c.failures.push_back(strf("trial %d: long leg mismatch at %zu", trial, i));
                break;
            }
            if (legs.short_leg[i] != elig_short[i].first) {
                c.failures.push_back(strf("trial %d: short leg mismatch at %zu", trial, i));
                break;
            }
        }
        // decile oracle
        if (universe_size >= 10) {
            std::vector<std::string> lo, so;
            oracle::decile_legs(scored, lo, so);
            const auto decile = form_decile_portfolio(prob, 2000);
            if (!decile || decile->long_leg != lo || decile->short_leg != so) {
                c.failures.push_back(strf("trial %d: decile legs deviate from the oracle",
                                          trial));
            }
        }
        if (!c.failures.empty()) break;
    }

    // reference arithmetic: mean 1.28, stdev 0.38 -> Sharpe 3.36 +/- 0.01
    {
        std::map<MonthKey, double> series;
        MonthKey m(2000, 1);
        const int n = 36;
        const double sample_sd = std::sqrt(static_cast<double>(n) / (n - 1.0));
        for (int i = 0; i < n; ++i, m = m.next()) {
            const double z = (i % 2 == 0 ? 1.0 : -1.0) / sample_sd;
            series[m] = 0.0128 + 0.0038 * z;
        }
        const SeriesStats s = series_stats(series);
        c.requiref(std::abs(s.mean - 1.28) < 1e-9, "mean %.6f", s.mean);
        c.requiref(std::abs(s.stdev - 0.38) < 1e-9, "stdev %.6f", s.stdev);
        c.requiref(std::abs(s.sharpe - 3.36) <= 0.01, "sharpe %.6f not within 3.36 +/- 0.01",
                   s.sharpe);
    }

    // 600-month CAPM simulation recovers alpha and beta
    {
        std::vector<FactorRow> factors;
        std::map<MonthKey, double> hl;
        Rng sim(77);
        MonthKey m(1970, 1);
        for (int i = 0; i < 600; ++i, m = m.next()) {
            FactorRow f;
            f.month = m;
            f.mktrf = 0.045 * sim.normal();
            factors.push_back(f);
            hl[m] = 0.005 + 1.0 * f.mktrf + 0.001 * sim.normal();
        }
        const auto fits = fit_factor_alphas(hl, factors);
        c.requiref(fits[0].alpha >= 0.45 && fits[0].alpha <= 0.55,
                   "CAPM alpha %.4f outside [0.45, 0.55]", fits[0].alpha);
        const double beta = fits[0].betas.at("mktrf");
        c.requiref(beta >= 0.97 && beta <= 1.03, "CAPM beta %.4f outside [0.97, 1.03]", beta);
    }
}

// ---------------------------------------------------------------------------
// 11 panel econometrics
// ---------------------------------------------------------------------------
void criterion_11(Criterion& c) {
    Rng rng(414);

    // binary regressor, no effects: exact difference in means
    {
        std::vector<PanelRow> rows;
        std::vector<double> y;
        std::vector<int> d;
        for (int i = 0; i < 151; ++i) {
            PanelRow r;
            const int treat = rng.uniform() < 0.35 ? 1 : 0;
            r.dep = 0.2 + 0.7 * treat + rng.normal();
            r.regressors = {static_cast<double>(treat)};
            r.year = 2000;
            r.industry = i % 5;
            rows.push_back(r);
            y.push_back(r.dep);
            d.push_back(treat);
        }
        PanelOptions opt;
        const auto res = panel_ols(rows, {"treat"}, opt);
        c.requiref(std::abs(res.coefficients.at("treat") - oracle::diff_in_means(y, d)) <= 1e-10,
                   "difference-in-means deviation %.3e",
                   std::abs(res.coefficients.at("treat") - oracle::diff_in_means(y, d)));
    }

    // clustered standard errors vs the hand-built sandwich on 3 clusters
    {
        std::vector<PanelRow> rows;
        std::vector<std::vector<double>> design;
        std::vector<double> yv;
        std::vector<int> cl;
        for (int i = 0; i < 120; ++i) {
            PanelRow r;
            const int cluster = i % 3;
            const double x1 = rng.normal(), x2 = rng.normal();
            r.dep = 0.5 * x1 - 0.3 * x2 + 0.4 * cluster + rng.normal();
            r.regressors = {x1, x2};
            r.year = 2000;
            r.industry = cluster;
            rows.push_back(r);
            design.push_back({1.0, x1, x2});
            yv.push_back(r.dep);
            cl.push_back(cluster);
        }
        PanelOptions opt;
        opt.cluster_by_industry = true;
        const auto res = panel_ols(rows, {"x1", "x2"}, opt);

        std::vector<std::vector<double>> xtx(3, std::vector<double>(3, 0.0));
        std::vector<double> xty(3, 0.0);
        for (size_t i = 0; i < design.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                xty[static_cast<size_t>(a)] += design[i][static_cast<size_t>(a)] * yv[i];
                for (int b = 0; b < 3; ++b) {
                    xtx[static_cast<size_t>(a)][static_cast<size_t>(b)] +=
                        design[i][static_cast<size_t>(a)] * design[i][static_cast<size_t>(b)];
                }
            }
        }
        const auto beta = oracle::solve_linear(xtx, xty);
        std::vector<double> resid(design.size());
        for (size_t i = 0; i < design.size(); ++i) {
            resid[i] = yv[i] - beta[0] - beta[1] * design[i][1] - beta[2] * design[i][2];
        }
        const auto se = oracle::clustered_se(design, resid, cl);
        c.requiref(std::abs(res.clustered_se.at("x1") - se[1]) <= 1e-8,
                   "clustered SE x1 deviates by %.3e",
                   std::abs(res.clustered_se.at("x1") - se[1]));
        c.requiref(std::abs(res.clustered_se.at("x2") - se[2]) <= 1e-8,
                   "clustered SE x2 deviates by %.3e",
                   std::abs(res.clustered_se.at("x2") - se[2]));
    }

    // dummy expansion vs within transformation
    {
        std::vector<PanelRow> rows;
        for (int i = 0; i < 300; ++i) {
            PanelRow r;
            const int year = 2000 + i % 6;
            const int ind = i % 9;
            const double x1 = rng.normal(), x2 = rng.normal();
            r.dep = 0.6 * x1 - 0.4 * x2 + 0.15 * year + 0.3 * ind + rng.normal();
            r.regressors = {x1, x2};
            r.year = year;
            r.industry = ind;
            rows.push_back(r);
        }
        PanelOptions dummy;
        dummy.fe_year = true;
        dummy.fe_industry = true;
        dummy.cluster_by_industry = true;
        dummy.method = FeMethod::DummyExpansion;
        PanelOptions within = dummy;
        within.method = FeMethod::Within;
        const auto a = panel_ols(rows, {"x1", "x2"}, dummy);
        const auto b = panel_ols(rows, {"x1", "x2"}, within);
        for (const char* name : {"x1", "x2"}) {
            c.requiref(std::abs(a.coefficients.at(name) - b.coefficients.at(name)) <= 1e-8,
                       "FE paths disagree on %s by %.3e", name,
                       std::abs(a.coefficients.at(name) - b.coefficients.at(name)));
        }
    }
}

// ---------------------------------------------------------------------------
// 12 stored year-guess distributions reproduce the reference probability
// ---------------------------------------------------------------------------
void criterion_12(Criterion& c) {
    std::ifstream in(kSourceDir + "/data/year_guess_distributions.json");
    c.require(static_cast<bool>(in), "distributions file missing");
    if (!in) return;
    nlohmann::json j;
    in >> j;
    std::map<int, double> p, q;
    for (const auto& [year, v] : j["per_year_hit_prob"].items()) p[std::stoi(year)] = v;
    for (const auto& [year, v] : j["per_year_share"].items()) q[std::stoi(year)] = v;
    const double prob = random_guess_probability(p, q);
    c.requiref(std::abs(prob - 0.033) <= 0.001,
               "expected probability %.5f outside 3.3%% +/- 0.1pp", prob);
}

}  // namespace

int main(int argc, char** argv) {
    struct Entry {
        const char* label;
        std::function<void(Criterion&)> fn;
    };
    const std::vector<Entry> criteria = {
        {"01 golden rendering reproduces the reference statements", criterion_01},
        {"02 identity suite + anonymity rejections over 1,000 rendered records", criterion_02},
        {"03 accuracy/F1/AUC match brute-force oracles on 500 sets", criterion_03},
        {"04 analytic MLP gradients match central differences (both architectures)",
         criterion_04},
        {"05 IRLS matches the Newton oracle; stepwise retains planted predictors",
         criterion_05},
        {"06 no training observation reaches its test year (both trainers)", criterion_06},
        {"07 predictable DGP separates MLP from random walk; null DGP covers 50%",
         criterion_07},
        {"08 mock pipeline: shaped reports, example payload, byte-identical warm rerun",
         criterion_08},
        {"09 calibrated confidence separates the quartiles", criterion_09},
        {"10 portfolio legs, Sharpe arithmetic, and simulated alphas match oracles",
         criterion_10},
        {"11 panel regressions match closed forms and hand-built sandwiches", criterion_11},
        {"12 stored year-guess distributions give the reference probability", criterion_12},
    };

    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        if (only > 0 && static_cast<int>(i) + 1 != only) continue;
        Criterion c;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].fn(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.failures.empty()) {
            std::printf("[PASS] %s (%.2fs)\n", criteria[i].label, seconds);
        } else {
            ++failed;
            std::printf("[FAIL] %s (%.2fs)\n", criteria[i].label, seconds);
            for (const auto& f : c.failures) std::printf("       - %s\n", f.c_str());
        }
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
