// Acceptance suite: runs every gate criterion end to end and prints one
// pass/fail line per criterion. Exit code is the number of failures.
//
// Run all criteria:        ./acceptance_tests
// Run a subset:            ./acceptance_tests --only 1,2,3,4
//
// Criteria 5-10 train real models; the whole suite is sized for a commodity
// single-core budget (the directional check alone stays under its stated
// 30-minute bound by a wide margin).

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fus/experiments.hpp"
#include "fus/model_io.hpp"

using namespace fus;

namespace {

// ---------------------------------------------------------------------------
// fixed desk-scale configurations

// Calibrated trigger for the training-based criteria: a bright corner patch
// over a mid-gray frame. Blended at lambda 0.15 it drives the baseline ASR
// mid-range with low seed variance; the seeded-checkerboard default is too
// weak here and its runs are bistable. Written once through the raw-file
// trigger interface.
std::string calibrated_trigger_file() {
    static const std::string path = [] {
        Trigger t;
        t.channels = 1;
        t.height = 12;
        t.width = 12;
        t.lambda = 0.15;
        t.image.assign(144, 0.5f);
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 5; ++x) t.image[y * 12 + x] = 1.0f;
        }
        const std::string p = "acceptance-trigger.raw";
        t.save_raw(p);
        return p;
    }();
    return path;
}

// Directional-effectiveness scale: ~10k train / 10 classes, small-cnn,
// 20-epoch schedule, r = 0.01, alpha = 0.5, N = 5. Noise level and trigger
// are calibrated so the random-selection baseline lands mid-range, where
// selection quality can show up at all.
RunConfig desk_config() {
    RunConfig cfg;
    cfg.synth.num_classes = 10;
    cfg.synth.per_class = 1000;
    cfg.synth.channels = 1;
    cfg.synth.height = 12;
    cfg.synth.width = 12;
    cfg.synth.noise_sigma = 0.07;
    cfg.synth.seed = 40;
    cfg.victim.arch = "small-cnn";
    cfg.victim.optimizer = "sgd";
    cfg.victim.momentum = 0.9;
    cfg.victim.weight_decay = 5e-4;
    cfg.victim.schedule.epochs = 20;
    cfg.victim.schedule.initial_lr = 0.01;
    cfg.victim.schedule.drop_epochs = {12, 17};
    cfg.victim.schedule.drop_factor = 10.0;
    cfg.victim.schedule.batch_size = 64;
    cfg.lambda = 0.15;
    cfg.target = 0;
    cfg.ratio = 0.01;
    cfg.alpha = 0.5;
    cfg.iterations = 5;
    cfg.trigger_file = calibrated_trigger_file();
    cfg.seed = 1;
    return cfg;
}

// Cheaper scale for the removal / iteration-growth / distribution-match
// statistics (these need 5-10 repeats each): 4k train, shorter schedule,
// r raised so the pool still holds 100 samples.
RunConfig small_config() {
    RunConfig cfg = desk_config();
    cfg.synth.per_class = 400;
    cfg.victim.schedule.epochs = 12;
    cfg.victim.schedule.drop_epochs = {7, 10};
    cfg.ratio = 0.025;
    return cfg;
}

// ---------------------------------------------------------------------------
// harness

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
};

struct SharedState {
    // populated by criterion 5, reused by 9 and 10
    std::vector<ExperimentReport> fus_reports;
    std::vector<ExperimentReport> rss_reports;
};

SharedState g_state;

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// criterion 1: gradient oracle

template <class ModelT>
double worst_grad_rel_error(ModelT& model, const std::vector<double>& batch,
                            const std::vector<int>& labels, int n) {
    model.zero_grads();
    model.loss_and_backward(batch, labels, n);
    std::vector<std::vector<double>> analytic;
    for (auto* p : model.params()) analytic.push_back(p->grad);

    constexpr double eps = 1e-5;
    double worst = 0.0;
    auto params = model.params();
    for (size_t b = 0; b < params.size(); ++b) {
        for (size_t j = 0; j < params[b]->value.size(); ++j) {
            const double keep = params[b]->value[j];
            params[b]->value[j] = keep + eps;
            const double lp = model.loss(batch, labels, n);
            params[b]->value[j] = keep - eps;
            const double lm = model.loss(batch, labels, n);
            params[b]->value[j] = keep;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = analytic[b][j];
            worst = std::max(worst, std::abs(a - numeric) /
                                        std::max({std::abs(a), std::abs(numeric), 1e-6}));
        }
    }
    return worst;
}

Outcome criterion_gradients() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    Rng rng(20250101);
    double worst = 0.0;
    int shapes = 0;

    // affine / relu stacks
    for (int trial = 0; trial < 8; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(8));
        const int hidden = 2 + static_cast<int>(rng.below(6));
        const int k = 2 + static_cast<int>(rng.below(4));
        Rng init(derive_seed(1, "acc-aff" + std::to_string(trial)));
        BasicModel<double> model(Dims{d, 1, 1}, k, "acc");
        model.add(std::make_unique<AffineLayer<double>>(Dims{d, 1, 1}, hidden, init));
        if (trial % 2 == 0) model.add(std::make_unique<ReluLayer<double>>(Dims{hidden, 1, 1}));
        model.add(std::make_unique<AffineLayer<double>>(Dims{hidden, 1, 1}, k, init));
        model.check_head();
        const int n = 1 + static_cast<int>(rng.below(3));
        std::vector<double> batch(static_cast<size_t>(n) * d);
        for (auto& v : batch) v = rng.uniform();
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& v : labels) v = static_cast<int>(rng.below(static_cast<uint64_t>(k)));
        worst = std::max(worst, worst_grad_rel_error(model, batch, labels, n));
        ++shapes;
    }
    // conv / pool / flatten stacks
    for (int trial = 0; trial < 10; ++trial) {
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(3));
        const int h = 4 + 2 * static_cast<int>(rng.below(3));
        const int w = 4 + 2 * static_cast<int>(rng.below(3));
        const int k = 2 + static_cast<int>(rng.below(3));
        Rng init(derive_seed(2, "acc-conv" + std::to_string(trial)));
        const Dims in{cin, h, w};
        BasicModel<double> model(in, k, "acc");
        model.add(std::make_unique<Conv2dLayer<double>>(in, cout, 3, init));
        Dims cur{cout, h, w};
        if (trial % 2 == 0) {
            model.add(std::make_unique<ReluLayer<double>>(cur));
        }
        model.add(std::make_unique<MaxPool2dLayer<double>>(cur));
        cur = Dims{cout, h / 2, w / 2};
        model.add(std::make_unique<FlattenLayer<double>>(cur));
        model.add(std::make_unique<AffineLayer<double>>(Dims{static_cast<int>(cur.numel()), 1, 1},
                                                        k, init));
        model.check_head();
        const int n = 1 + static_cast<int>(rng.below(2));
        std::vector<double> batch(static_cast<size_t>(n) * in.numel());
        for (auto& v : batch) v = rng.uniform();
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& v : labels) v = static_cast<int>(rng.below(static_cast<uint64_t>(k)));
        worst = std::max(worst, worst_grad_rel_error(model, batch, labels, n));
        ++shapes;
    }
    // full registry architectures
    for (int trial = 0; trial < 4; ++trial) {
        auto model = make_model<double>(trial % 2 == 0 ? "small-cnn" : "mlp", Dims{1, 8, 8}, 3,
                                        300 + static_cast<uint64_t>(trial));
        std::vector<double> batch(2 * 64);
        for (auto& v : batch) v = rng.uniform();
        const std::vector<int> labels = {static_cast<int>(rng.below(3)),
                                         static_cast<int>(rng.below(3))};
        worst = std::max(worst, worst_grad_rel_error(*model, batch, labels, 2));
        ++shapes;
    }

    const double secs = elapsed_s(start);
    out.pass = worst < 1e-4 && shapes >= 20 && secs < 60.0;
    out.detail << shapes << " shapes, worst rel err " << worst << ", " << secs << "s";
    return out;
}

// ---------------------------------------------------------------------------
// criterion 2: forgetting-count oracle

Outcome criterion_forgetting_oracle() {
    Outcome out;

    const auto count_of = [](const std::vector<uint8_t>& bits) {
        CorrectnessTrace trace({0});
        for (size_t t = 0; t < bits.size(); ++t) trace.observe(static_cast<int>(t), {bits[t]});
        return forgetting_counts(trace).counts[0];
    };
    bool fixed_ok = count_of({1, 1, 1}) == 0 && count_of({0, 0, 0}) == 0 &&
                    count_of({1, 0, 1, 0}) == 2 && count_of({0, 1, 1, 0}) == 1;

    Rng rng(77);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 1 + rng.below(10);
        const size_t steps = 1 + rng.below(12);
        std::vector<std::vector<uint8_t>> rows(n, std::vector<uint8_t>(steps));
        for (auto& row : rows) {
            for (auto& b : row) b = static_cast<uint8_t>(rng.below(2));
        }
        std::vector<size_t> ids(n);
        for (size_t i = 0; i < n; ++i) ids[i] = i;
        CorrectnessTrace trace(ids);
        for (size_t t = 0; t < steps; ++t) {
            std::vector<uint8_t> col(n);
            for (size_t s = 0; s < n; ++s) col[s] = rows[s][t];
            trace.observe(static_cast<int>(t), col);
        }
        const auto got = forgetting_counts(trace);
        // independent brute-force re-scan of the stored matrix
        for (size_t s = 0; s < n; ++s) {
            int expect = 0;
            for (size_t t = 0; t + 1 < steps; ++t) {
                if (rows[s][t] == 1 && rows[s][t + 1] == 0) ++expect;
            }
            if (got.counts[s] != expect) ++mismatches;
        }
    }
    out.pass = fixed_ok && mismatches == 0;
    out.detail << "fixed cases " << (fixed_ok ? "ok" : "WRONG") << ", 1000 random matrices, "
               << mismatches << " mismatches";
    return out;
}

// ---------------------------------------------------------------------------
// criterion 3: pool invariants

Outcome criterion_pool_invariants() {
    Outcome out;
    Rng rng(31337);
    int violations = 0;
    for (int round = 0; round < 1000; ++round) {
        const size_t universe = 10 + rng.below(400);
        const size_t m = 1 + rng.below(universe / 2 + 1);
        SamplePool pool = rss_select(universe, m, rng.next_u64());

        ForgettingCounts counts;
        counts.ids = pool.indices();
        for (size_t i = 0; i < m; ++i) counts.counts.push_back(static_cast<int>(rng.below(5)));

        const size_t k = rng.below(m + 1);
        const SamplePool filtered = filter_lowest(pool, counts, k, rng.next_u64());
        if (filtered.size() != m - k) ++violations;

        // k-smallest validity: the multiset of removed counts must equal the
        // k smallest count values overall
        std::vector<int> all = counts.counts;
        std::sort(all.begin(), all.end());
        std::vector<int> removed_counts;
        for (size_t i = 0; i < counts.ids.size(); ++i) {
            if (!filtered.contains(counts.ids[i])) removed_counts.push_back(counts.counts[i]);
        }
        std::sort(removed_counts.begin(), removed_counts.end());
        if (removed_counts.size() != k ||
            !std::equal(removed_counts.begin(), removed_counts.end(), all.begin())) {
            ++violations;
        }

        const SamplePool refilled = refill(filtered, universe, k, rng.next_u64());
        if (refilled.size() != m) ++violations;
        const std::set<size_t> unique(refilled.indices().begin(), refilled.indices().end());
        if (unique.size() != m) ++violations;
        size_t fresh = 0;
        for (size_t id : refilled.indices()) {
            if (!filtered.contains(id)) ++fresh;
        }
        if (fresh != k) ++violations;  // refill freshness
        for (size_t id : filtered.indices()) {
            if (!refilled.contains(id)) ++violations;
        }
    }

    // N = 0 degenerates to RSS, exactly
    bool n0_ok = true;
    for (uint64_t seed : {1ULL, 7ULL, 99ULL}) {
        FusConfig fc;
        fc.ratio = 0.03;
        fc.alpha = 0.5;
        fc.iterations = 0;
        fc.seed = seed;
        const SamplePool via_fus = fus_select(5000, fc, ForgettingTrainerFn{});
        const SamplePool via_rss = rss_select(5000, pool_size(0.03, 5000),
                                              derive_seed(seed, "select/init"));
        if (!(via_fus == via_rss)) n0_ok = false;
    }

    out.pass = violations == 0 && n0_ok;
    out.detail << "1000 rounds, " << violations << " violations; N=0 == RSS "
               << (n0_ok ? "exact" : "BROKEN");
    return out;
}

// ---------------------------------------------------------------------------
// criterion 4: fusion exactness

Outcome criterion_fusion() {
    Outcome out;
    Rng rng(4242);
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 1 + rng.below(256);
        std::vector<float> x(n), k(n);
        for (auto& v : x) v = static_cast<float>(rng.uniform());
        for (auto& v : k) v = static_cast<float>(rng.uniform());

        if (blend_fuse(x, k, 0.0) != x) ++failures;  // bit-exact identity
        if (blend_fuse(x, k, 1.0) != k) ++failures;  // bit-exact trigger

        const double lam = rng.uniform();
        for (float v : blend_fuse(x, k, lam)) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                ++failures;
                break;
            }
        }
    }
    out.pass = failures == 0;
    out.detail << "1000 randomized trials, " << failures << " failures";
    return out;
}

// ---------------------------------------------------------------------------
// criterion 5: directional effectiveness

Outcome criterion_directional() {
    Outcome out;
    const RunConfig cfg = desk_config();
    Runner runner(cfg);
    const int seeds = 5;

    std::vector<double> rss_asr, fus_asr;
    for (int s = 0; s < seeds; ++s) {
        // paired design: FUS starts from the same initial pool as RSS and the
        // injection uses the same victim seed, so the pools are the only
        // difference
        const uint64_t master = derive_seed(cfg.seed, "acceptance/rep" + std::to_string(s));
        const SamplePool rss = runner.select_pool("rss", master);
        const SamplePool fus = runner.select_pool("fus", master);
        const uint64_t inject = derive_seed(master, "inject");
        ExperimentReport rep_rss = runner.inject_and_evaluate(rss, inject);
        ExperimentReport rep_fus = runner.inject_and_evaluate(fus, inject);
        rss_asr.push_back(rep_rss.attack_success_rate);
        fus_asr.push_back(rep_fus.attack_success_rate);
        g_state.rss_reports.push_back(std::move(rep_rss));
        g_state.fus_reports.push_back(std::move(rep_fus));
        out.detail << "[s" << s << " rss " << rss_asr.back() << " fus " << fus_asr.back() << "] ";
    }
    const SummaryStat r = summarize(rss_asr), f = summarize(fus_asr);
    const double margin = f.mean - r.mean;
    out.pass = f.mean > r.mean && margin >= 0.01;
    out.detail << "mean rss " << r.mean << ", mean fus " << f.mean << ", margin " << margin;
    return out;
}

// ---------------------------------------------------------------------------
// criterion 6: removal-experiment shape

Outcome criterion_removal() {
    Outcome out;
    const RunConfig cfg = small_config();
    Runner runner(cfg);
    const std::vector<double> percents = {0.0, 0.2, 0.4};
    const RemovalResult result = removal_experiment(runner, percents, /*repeats=*/5);

    out.pass = true;
    for (size_t i = 0; i < percents.size(); ++i) {
        out.detail << "p" << percents[i] << " sel " << result.selective_mean[i] << " rnd "
                   << result.random_mean[i] << "; ";
        if (result.selective_mean[i] < result.random_mean[i]) out.pass = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// criterion 7: iteration growth

Outcome criterion_iteration_growth() {
    Outcome out;
    const RunConfig cfg = small_config();
    Runner runner(cfg);
    const IterationCurve curve = ablation_iterations(runner, /*n_max=*/5, /*repeats=*/10);
    out.detail << "mean asr by n:";
    for (double v : curve.mean_asr) out.detail << " " << v;
    out.pass = curve.mean_asr[5] > curve.mean_asr[0];
    return out;
}

// ---------------------------------------------------------------------------
// criterion 8: distribution-match null result

Outcome criterion_distribution_match() {
    Outcome out;
    const RunConfig cfg = small_config();
    Runner runner(cfg);
    const SamplePool donor = runner.select_pool("fus", derive_seed(cfg.seed, "acceptance/donor"));
    const DistMatchResult result = distribution_matched_rss(runner, donor, /*repeats=*/10);

    const double n_u = result.uniform.n, n_m = result.matched.n;
    const double se = std::sqrt(result.uniform.stddev * result.uniform.stddev / n_u +
                                result.matched.stddev * result.matched.stddev / n_m);
    const double diff = std::abs(result.matched.mean - result.uniform.mean);
    out.pass = diff < 2.0 * se;
    out.detail << "uniform " << result.uniform.mean << " matched " << result.matched.mean
               << " |diff| " << diff << " vs 2se " << 2.0 * se;
    return out;
}

// ---------------------------------------------------------------------------
// criterion 9: determinism of report reruns

Outcome criterion_determinism() {
    Outcome out;
    ExperimentReport original;
    if (!g_state.fus_reports.empty()) {
        original = g_state.fus_reports.front();
    } else {
        RunConfig cfg = small_config();
        Runner runner(cfg);
        const uint64_t master = derive_seed(cfg.seed, "acceptance/det");
        original = runner.inject_and_evaluate(runner.select_pool("rss", master),
                                              derive_seed(master, "inject"));
    }

    // round-trip through the JSON echo, then rerun from the echo alone
    const ExperimentReport parsed = report_from_json(report_to_json(original));
    Runner rebuilt(parsed.config);
    const SamplePool pool = SamplePool::from_indices(parsed.pool, rebuilt.universe());
    const ExperimentReport rerun =
        rebuilt.inject_and_evaluate(pool, parsed.run_seed, parsed.config.victim);

    const bool asr_same = rerun.attack_success_rate == original.attack_success_rate;
    const bool clean_same = rerun.clean_accuracy == original.clean_accuracy;
    out.pass = asr_same && clean_same;
    out.detail << "asr " << original.attack_success_rate << " -> " << rerun.attack_success_rate
               << (asr_same ? " (bit-exact)" : " (MISMATCH)") << ", clean "
               << original.clean_accuracy << " -> " << rerun.clean_accuracy
               << (clean_same ? " (bit-exact)" : " (MISMATCH)");
    return out;
}

// ---------------------------------------------------------------------------
// criterion 10: clean-accuracy guard

Outcome criterion_clean_guard() {
    Outcome out;
    const RunConfig cfg = desk_config();
    Runner runner(cfg);

    std::vector<std::pair<double, uint64_t>> infected;  // clean accuracy, run seed
    if (!g_state.fus_reports.empty()) {
        for (size_t i = 0; i < 2 && i < g_state.fus_reports.size(); ++i) {
            infected.emplace_back(g_state.fus_reports[i].clean_accuracy,
                                  g_state.fus_reports[i].run_seed);
            infected.emplace_back(g_state.rss_reports[i].clean_accuracy,
                                  g_state.rss_reports[i].run_seed);
        }
    } else {
        const uint64_t master = derive_seed(cfg.seed, "acceptance/guard");
        const ExperimentReport rep = runner.inject_and_evaluate(
            runner.select_pool("rss", master), derive_seed(master, "inject"));
        infected.emplace_back(rep.clean_accuracy, rep.run_seed);
    }

    out.pass = true;
    std::set<uint64_t> twin_seeds;
    for (const auto& [clean, run_seed] : infected) {
        if (!twin_seeds.insert(run_seed).second) continue;
        const double twin = runner.clean_twin_accuracy(cfg.victim, run_seed);
        const double gap = twin - clean;
        out.detail << "[infected " << clean << " twin " << twin << "] ";
        if (gap > 0.02) out.pass = false;
    }
    return out;
}

struct Criterion {
    int number;
    std::string name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::istringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "gradient oracle", criterion_gradients},
        {2, "forgetting-count oracle", criterion_forgetting_oracle},
        {3, "pool invariants", criterion_pool_invariants},
        {4, "fusion exactness", criterion_fusion},
        {5, "directional effectiveness", criterion_directional},
        {6, "removal-experiment shape", criterion_removal},
        {7, "iteration growth", criterion_iteration_growth},
        {8, "distribution-match null result", criterion_distribution_match},
        {9, "determinism", criterion_determinism},
        {10, "clean-accuracy guard", criterion_clean_guard},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!only.empty() && only.count(criterion.number) == 0) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail << "exception: " << e.what();
        }
        if (!outcome.pass) ++failures;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << ": criterion " << criterion.number
                  << " (" << criterion.name << "): " << outcome.detail.str() << " ["
                  << elapsed_s(start) << "s]" << std::endl;
    }
    if (failures == 0) {
        std::cout << "acceptance: all criteria passed" << std::endl;
    } else {
        std::cout << "acceptance: " << failures << " criteria FAILED" << std::endl;
    }
    return failures;
}
