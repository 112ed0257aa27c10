// Command-line front end: every pipeline stage is a standalone subcommand,
// all driven by a single JSON config with flag overrides.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsa/config.hpp"
#include "fsa/fundamentals.hpp"
#include "fsa/pipeline.hpp"
#include "fsa/statements.hpp"
#include "fsa/synthetic.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> methods;
    int from_year = -1;
    int to_year = -1;
    long long seed = -1;
    std::string output_dir;
    double transaction_cost_bps = -1.0;
    double stepwise_alpha = -1.0;
    std::vector<std::string> weightings;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config,-c", args.config_path, "experiment config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--method", args.methods, "override the method list (repeatable)");
    cmd->add_option("--from-year", args.from_year, "first test year");
    cmd->add_option("--to-year", args.to_year, "last test year");
    cmd->add_option("--seed", args.seed, "override the experiment seed");
    cmd->add_option("--output-dir", args.output_dir, "override the output directory");
    cmd->add_option("--transaction-cost-bps", args.transaction_cost_bps,
                    "per-leg monthly cost haircut in basis points");
    cmd->add_option("--stepwise-alpha", args.stepwise_alpha,
                    "significance threshold for stepwise selection");
    cmd->add_option("--weighting", args.weightings, "backtest weighting: ew or vw (repeatable)");
}

std::string canonical_method(std::string m) {
    for (char& c : m) {
        if (c == '-') c = '_';
    }
    if (m == "gpt") return "gpt_cot";
    if (m == "ann") return "ann_op";
    return m;
}

fsa::ExperimentConfig load_with_overrides(const CommonArgs& args) {
    fsa::ExperimentConfig cfg = fsa::load_config(args.config_path);
    if (!args.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : args.methods) cfg.methods.push_back(canonical_method(m));
    }
    if (args.from_year >= 0) cfg.from_year = args.from_year;
    if (args.to_year >= 0) cfg.to_year = args.to_year;
    if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
    if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
    if (args.transaction_cost_bps >= 0.0) {
        cfg.backtest.transaction_cost_bps = args.transaction_cost_bps;
    }
    if (args.stepwise_alpha >= 0.0) cfg.stepwise_alpha = args.stepwise_alpha;
    if (!args.weightings.empty()) cfg.backtest.weightings = args.weightings;
    return cfg;
}

int finish(const fsa::PipelineResult& result) {
    for (const auto& e : result.errors) std::fprintf(stderr, "note: %s\n", e.c_str());
    std::printf("provider_calls=%d embedding_calls=%d parse_failures=%d\n",
                result.provider_calls, result.embedding_calls, result.parse_failures);
    for (const auto& [method, s] : result.scores) {
        std::printf("%-26s n=%-6ld accuracy=%.2f%% f1=%.2f%%\n", method.c_str(),
                    s.counts.total(), 100.0 * s.accuracy, 100.0 * s.f1);
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"financial statement analysis laboratory"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic universe");
    std::string synth_out = "synth";
    std::string synth_manifest;
    fsa::SynthParams params;
    bool null_dgp = false;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--manifest", synth_manifest, "regenerate from an existing manifest");
    synth->add_option("--firms", params.n_firms, "number of firms");
    synth->add_option("--first-year", params.first_year, "first fiscal year");
    synth->add_option("--last-year", params.last_year, "last fiscal year");
    synth->add_option("--seed", params.seed, "generator seed");
    synth->add_option("--mean-reversion", params.mean_reversion, "margin mean reversion (kappa)");
    synth->add_option("--signal-strength", params.signal_strength, "observable signal loading");
    synth->add_option("--mock-accuracy", params.mock_accuracy, "scripted LLM hit rate");
    synth->add_option("--mock-confidence-calibration", params.mock_confidence_calibration,
                      "0 = uninformative confidence, 1 = confidence equals correctness");
    synth->add_flag("--null-dgp", null_dgp,
                    "unpredictable earnings (no mean reversion, no signal, zero drift)");

    // data-stage subcommands share the common options
    CommonArgs ingest_args, render_args, predict_args, train_args, evaluate_args, backtest_args,
        report_args, guess_args;
    auto* ingest = app.add_subcommand("ingest", "load fundamentals and apply sample filters");
    add_common(ingest, ingest_args);
    auto* render = app.add_subcommand("render", "print the standardized statements");
    add_common(render, render_args);
    std::string render_firm;
    int render_year = 0;
    render->add_option("--firm", render_firm, "firm id")->required();
    render->add_option("--year", render_year, "fiscal year")->required();
    auto* predict = app.add_subcommand("predict", "LLM predictions only");
    add_common(predict, predict_args);
    auto* train = app.add_subcommand("train", "rolling-window baseline training");
    add_common(train, train_args);  // --method selects logit | ann-op | ann-fs
    auto* evaluate = app.add_subcommand("evaluate", "predictions + evaluation, no backtest");
    add_common(evaluate, evaluate_args);
    auto* backtest = app.add_subcommand("backtest", "full pipeline incl. portfolios");
    add_common(backtest, backtest_args);
    auto* report = app.add_subcommand("report", "full pipeline and report bundle");
    add_common(report, report_args);
    auto* guess = app.add_subcommand("guess", "identity/year memory probe");
    add_common(guess, guess_args);
    int guess_limit = 0;
    guess->add_option("--limit", guess_limit, "cap the number of probed firm-years");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!synth_manifest.empty()) {
                params = fsa::synth_params_from_manifest(synth_manifest);
            } else if (null_dgp) {
                params.mean_reversion = 0.0;
                params.signal_strength = 0.0;
                params.sales_growth_mean = 0.0;
                params.return_signal = 0.0;
            }
            fsa::generate_synthetic_universe(params, synth_out);
            std::printf("synthetic universe written to %s\n", synth_out.c_str());
            return 0;
        }
        if (ingest->parsed()) {
            const auto cfg = load_with_overrides(ingest_args);
            fsa::validate_config(cfg);
            const fsa::Panel panel = fsa::Panel::load(cfg.fundamentals_path);
            const auto outcome = fsa::apply_sample_filters(panel.records());
            std::printf("rows -> records: %zu, kept: %zu, rejected: %zu\n",
                        panel.records().size(), outcome.kept.size(), outcome.rejected.size());
            size_t shown = 0;
            for (const auto& r : outcome.rejected) {
                if (++shown > 50) {
                    std::printf("... and %zu more\n", outcome.rejected.size() - 50);
                    break;
                }
                std::printf("rejected %s %d: %s %s\n", r.key.firm_id.c_str(),
                            r.key.fiscal_year, fsa::to_string(r.reason).c_str(),
                            r.detail.c_str());
            }
            return 0;
        }
        if (render->parsed()) {
            const auto cfg = load_with_overrides(render_args);
            const fsa::Panel panel = fsa::Panel::load(cfg.fundamentals_path);
            const fsa::FirmYearRecord* rec = panel.record({render_firm, render_year});
            if (!rec) {
                std::fprintf(stderr, "no record for %s %d\n", render_firm.c_str(), render_year);
                return 1;
            }
            std::fputs(fsa::standardize(*rec).rendered_text.c_str(), stdout);
            return 0;
        }
        if (predict->parsed()) {
            auto cfg = load_with_overrides(predict_args);
            if (predict_args.methods.empty()) cfg.methods = {"gpt_cot", "gpt_simple"};
            cfg.backtest.enabled = false;
            return finish(fsa::run_pipeline(cfg));
        }
        if (train->parsed()) {
            auto cfg = load_with_overrides(train_args);
            if (train_args.methods.empty()) cfg.methods = {"logit"};
            cfg.backtest.enabled = false;
            return finish(fsa::run_pipeline(cfg));
        }
        if (evaluate->parsed()) {
            auto cfg = load_with_overrides(evaluate_args);
            cfg.backtest.enabled = false;
            return finish(fsa::run_pipeline(cfg));
        }
        if (backtest->parsed() || report->parsed()) {
            auto cfg = load_with_overrides(backtest->parsed() ? backtest_args : report_args);
            cfg.backtest.enabled = true;
            return finish(fsa::run_pipeline(cfg));
        }
        if (guess->parsed()) {
            const auto cfg = load_with_overrides(guess_args);
            const auto probe = fsa::run_guess_probe(cfg, guess_limit);
            for (const auto& e : probe.errors) std::fprintf(stderr, "note: %s\n", e.c_str());
            if (probe.n == 0) {
                std::fprintf(stderr, "no usable guesses\n");
                return 1;
            }
            std::printf("n=%d top1=%.2f%% top10=%.2f%% year=%.2f%% random_guess=%.2f%%\n",
                        probe.n, 100.0 * probe.top1_hits / probe.n,
                        100.0 * probe.top10_hits / probe.n, 100.0 * probe.year_hits / probe.n,
                        100.0 * probe.random_guess_prob);
            return 0;
        }
    } catch (const fsa::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        const std::string what = e.what();
        return what.rfind("config", 0) == 0 ? 2 : 1;
    }
    return 0;
}
