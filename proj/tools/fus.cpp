// Command-line frontend: poisoned-sample selection, backdoor injection and
// evaluation, and the experiment studies. All knobs live in a flat key=value
// config file; study-specific lists use the "study." prefix.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fus/experiments.hpp"
#include "fus/model_io.hpp"

namespace {

using namespace fus;

RunConfig load_run_config(const std::string& path, uint64_t seed_override, int threads_override) {
    RunConfig cfg = RunConfig::from_file(path);
    if (seed_override != 0) cfg.seed = seed_override;
    if (threads_override > 0) cfg.threads = threads_override;
    return cfg;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

int cmd_select(const std::string& config_path, uint64_t seed_override, int threads_override,
               const std::string& strategy_override, const std::string& out_path) {
    RunConfig cfg = load_run_config(config_path, seed_override, threads_override);
    if (!strategy_override.empty()) cfg.strategy = strategy_override;
    Runner runner(cfg);
    const SamplePool pool = runner.select_pool(cfg.strategy, cfg.seed);
    save_pool(pool, cfg.ratio, cfg.alpha, cfg.strategy == "rss" ? 0 : cfg.iterations, cfg.seed,
              out_path);
    std::cout << "selected " << pool.size() << " / " << runner.universe() << " samples ("
              << cfg.strategy << ") -> " << out_path << "\n";
    return 0;
}

int cmd_inject(const std::string& config_path, uint64_t seed_override, int threads_override,
               const std::string& pool_path, const std::string& report_path,
               const std::string& model_path, const std::string& trace_path, bool with_twin,
               bool curves) {
    RunConfig cfg = load_run_config(config_path, seed_override, threads_override);
    Runner runner(cfg);

    SamplePool pool;
    if (!pool_path.empty()) {
        pool = load_pool(pool_path, runner.universe());
    } else {
        pool = runner.select_pool(cfg.strategy, cfg.seed);
    }

    const uint64_t run_seed = derive_seed(cfg.seed, "inject");
    if (with_twin && cfg.epsilon < 0) {
        const double twin = runner.clean_twin_accuracy(cfg.victim, run_seed);
        cfg.epsilon = twin - 0.02;
        runner = Runner(cfg);  // rebuild so the report echoes the resolved epsilon
        std::cout << "clean twin accuracy " << twin << ", epsilon " << cfg.epsilon << "\n";
    }

    std::unique_ptr<CorrectnessTrace> trace;
    if (!trace_path.empty() && !pool.empty()) {
        trace = std::make_unique<CorrectnessTrace>(pool.indices());
    }
    ExperimentReport report =
        runner.inject_and_evaluate(pool, run_seed, cfg.victim, curves, trace.get());
    write_text_file(report_path, report_to_json(report));
    if (trace) {
        std::ofstream trace_out(trace_path);
        if (!trace_out) throw DataError("cannot open " + trace_path + " for writing");
        write_trace_csv(*trace, trace_out);
        std::cout << "correctness trace -> " << trace_path << "\n";
    }
    std::cout << "clean accuracy " << report.clean_accuracy << ", attack success rate "
              << report.attack_success_rate;
    if (report.epsilon >= 0) {
        std::cout << (report.epsilon_pass ? " (clean-accuracy floor met)"
                                          : " (below clean-accuracy floor)");
    }
    std::cout << " -> " << report_path << "\n";

    if (!model_path.empty()) {
        auto model = runner.train_infected(pool, cfg.victim, run_seed);
        save_model(*model, model_path);
        std::cout << "model -> " << model_path << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& config_path, uint64_t seed_override, int threads_override,
             const std::string& model_path, const std::string& pool_path,
             const std::string& out_path) {
    const RunConfig cfg = load_run_config(config_path, seed_override, threads_override);
    Runner runner(cfg);
    auto model = load_model(model_path);

    const double clean = clean_accuracy(*model, runner.test_set());
    const double asr = runner.attack_success_rate(*model);

    std::ostringstream json;
    json << "{\n  \"kind\": \"fus-eval\",\n  \"clean_accuracy\": " << std::setprecision(17)
         << clean << ",\n  \"attack_success_rate\": " << asr;
    if (!pool_path.empty()) {
        const SamplePool pool = load_pool(pool_path, runner.universe());
        json << ",\n  \"pool_size\": " << pool.size();
    }
    json << "\n}\n";
    write_text_file(out_path, json.str());
    std::cout << "clean accuracy " << clean << ", attack success rate " << asr << " -> "
              << out_path << "\n";
    return 0;
}

int cmd_rerun(const std::string& report_path, const std::string& out_path) {
    std::ifstream in(report_path);
    if (!in) throw DataError("cannot open " + report_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const ExperimentReport original = report_from_json(buf.str());

    Runner runner(original.config);
    const SamplePool pool = SamplePool::from_indices(original.pool, runner.universe());
    const ExperimentReport redo =
        runner.inject_and_evaluate(pool, original.run_seed, original.config.victim,
                                   !original.clean_curve.empty());
    if (!out_path.empty()) write_text_file(out_path, report_to_json(redo));

    const bool match = redo.clean_accuracy == original.clean_accuracy &&
                       redo.attack_success_rate == original.attack_success_rate;
    std::cout << "rerun clean accuracy " << redo.clean_accuracy << ", attack success rate "
              << redo.attack_success_rate << (match ? " (matches report)" : " (MISMATCH)")
              << "\n";
    return match ? 0 : 1;
}

std::vector<VictimSettings> injection_settings_from_config(const RunConfig& cfg,
                                                           const KvConfig& kv) {
    const auto archs = [&] {
        std::vector<std::string> out;
        std::istringstream ss(kv.get_str("study.blackbox_archs", cfg.victim.arch));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) out.push_back(tok);
        }
        return out;
    }();
    const auto opts = [&] {
        std::vector<std::string> out;
        std::istringstream ss(kv.get_str("study.blackbox_optimizers", cfg.victim.optimizer));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) out.push_back(tok);
        }
        return out;
    }();
    const auto batches =
        kv.get_int_list("study.blackbox_batch_sizes", {cfg.victim.schedule.batch_size});
    const auto lrs = kv.get_double_list("study.blackbox_lrs", {cfg.victim.schedule.initial_lr});

    std::vector<VictimSettings> out;
    for (const auto& arch : archs) {
        for (const auto& opt : opts) {
            for (int batch : batches) {
                for (double lr : lrs) {
                    VictimSettings v = cfg.victim;
                    v.arch = arch;
                    v.optimizer = opt;
                    v.schedule.batch_size = batch;
                    v.schedule.initial_lr = lr;
                    out.push_back(std::move(v));
                }
            }
        }
    }
    return out;
}

int cmd_experiment(const std::string& study, const std::string& config_path,
                   uint64_t seed_override, int threads_override, const std::string& out_path) {
    const KvConfig kv = KvConfig::load(config_path);
    RunConfig cfg = RunConfig::from_kv(kv);
    if (seed_override != 0) cfg.seed = seed_override;
    if (threads_override > 0) cfg.threads = threads_override;
    Runner runner(cfg);

    const std::string out = out_path.empty() ? study + ".csv" : out_path;
    std::ofstream os(out);
    if (!os) throw DataError("cannot open " + out + " for writing");

    const auto r_list = kv.get_double_list("study.r_list", {cfg.ratio});
    const int repeats = kv.get_int("study.repeats", 5);

    if (study == "whitebox" || study == "volume") {
        const int fus_repeats = kv.get_int("study.fus_repeats", 3);
        const int rss_repeats = kv.get_int("study.rss_repeats", 30);
        const WhiteboxResult result = whitebox_curve(runner, r_list, fus_repeats, rss_repeats);
        if (study == "whitebox") {
            write_whitebox_csv(result, runner, os);
        } else {
            const bool use_best = kv.get_bool("study.use_best", true);
            const auto savings = volume_savings(result.fus_curve, result.rss_curve, use_best);
            write_savings_csv(savings, runner, os);
        }
    } else if (study == "removal") {
        const auto percents =
            kv.get_double_list("study.percent_list", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
        const RemovalResult result = removal_experiment(runner, percents, repeats);
        write_removal_csv(result, runner, os);
    } else if (study == "candidate-volume") {
        const auto rows = candidate_volume_experiment(runner, r_list);
        write_volume_hist_csv(rows, runner, os);
    } else if (study == "blackbox") {
        RunMatrix matrix;
        for (double r : kv.get_double_list("study.blackbox_r_list", {cfg.ratio})) {
            matrix.selection.push_back({cfg.victim, r});
        }
        matrix.injection = injection_settings_from_config(cfg, kv);
        matrix.repeats = kv.get_int("study.repeats", 1);
        const BlackboxResult result = blackbox_matrix(runner, matrix);
        write_blackbox_csv(result, runner, os);
    } else if (study == "alpha") {
        const auto alpha_list =
            kv.get_double_list("study.alpha_list", {0.1, 0.3, 0.5, 0.7, 0.9, 1.0});
        const auto cells = ablation_alpha(runner, alpha_list, r_list,
                                          kv.get_int("study.repeats", 3));
        write_alpha_csv(cells, runner, os);
    } else if (study == "iterations") {
        const int n_max = kv.get_int("study.n_max", cfg.iterations);
        const IterationCurve curve = ablation_iterations(runner, n_max, repeats);
        write_iterations_csv(curve, runner, os);
    } else if (study == "attribution") {
        // class histogram of a FUS pool, plus the distribution-matched
        // control comparison
        const SamplePool fus_pool = runner.select_pool("fus", cfg.seed);
        const auto hist = attribution_class_hist(fus_pool, runner.train_set());
        write_attribution_csv(hist, runner, os);
        const DistMatchResult result = distribution_matched_rss(runner, fus_pool, repeats);
        os << "\n";
        write_distmatch_csv(result, runner, os);
        std::cout << "uniform mean asr " << result.uniform.mean << " (max "
                  << result.uniform.best << "), matched mean asr " << result.matched.mean
                  << " (max " << result.matched.best << ")\n";
    } else {
        std::cerr << "unknown study: " << study << "\n";
        return 2;
    }
    std::cout << study << " -> " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-efficient backdoor poisoning toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, pool_path, report_path, model_path, trace_path, strategy;
    uint64_t seed_override = 0;
    int threads_override = 0;
    bool with_twin = false, curves = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* opt = cmd->add_option("-c,--config", config_path, "flat key=value config file");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed_override, "override the master seed (nonzero)");
        cmd->add_option("--threads", threads_override, "override worker thread count");
    };

    auto* select = app.add_subcommand("select", "select a poisoned-sample pool");
    add_common(select);
    select->add_option("-o,--out", out_path, "pool file path")->default_val("pool.txt");
    select->add_option("--strategy", strategy, "rss | fus (overrides config)");

    auto* inject = app.add_subcommand("inject", "train an infected model and report metrics");
    add_common(inject);
    inject->add_option("--pool", pool_path, "pool file (default: select per config)");
    inject->add_option("--report", report_path, "report JSON path")->default_val("report.json");
    inject->add_option("--save-model", model_path, "save the trained model here");
    inject->add_option("--trace", trace_path,
                       "write the pool's correctness trace as CSV (sample_id, epoch, correct)");
    inject->add_flag("--with-twin", with_twin,
                     "train a clean twin to derive the clean-accuracy floor");
    inject->add_flag("--curves", curves, "record per-epoch clean accuracy");

    auto* eval = app.add_subcommand("eval", "re-evaluate a saved model");
    add_common(eval);
    eval->add_option("--model", model_path, "model checkpoint")->required();
    eval->add_option("--pool", pool_path, "pool file to echo into the output");
    eval->add_option("-o,--out", out_path, "output JSON path")->default_val("eval.json");

    auto* rerun = app.add_subcommand("rerun", "re-run a report's config echo and compare");
    rerun->add_option("--report", report_path, "report JSON to reproduce")->required();
    rerun->add_option("-o,--out", out_path, "write the rerun report here");

    auto* experiment = app.add_subcommand("experiment", "run a study and emit CSV");
    std::string study;
    experiment
        ->add_option("study", study,
                     "whitebox | volume | removal | candidate-volume | blackbox | alpha | "
                     "iterations | attribution")
        ->required();
    add_common(experiment);
    experiment->add_option("-o,--out", out_path, "CSV output path (default <study>.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (select->parsed()) {
            return cmd_select(config_path, seed_override, threads_override, strategy, out_path);
        }
        if (inject->parsed()) {
            return cmd_inject(config_path, seed_override, threads_override, pool_path,
                              report_path, model_path, trace_path, with_twin, curves);
        }
        if (eval->parsed()) {
            return cmd_eval(config_path, seed_override, threads_override, model_path, pool_path,
                            out_path);
        }
        if (rerun->parsed()) {
            return cmd_rerun(report_path, out_path);
        }
        if (experiment->parsed()) {
            return cmd_experiment(study, config_path, seed_override, threads_override, out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
