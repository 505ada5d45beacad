#include "fus/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fus/error.hpp"
#include "fus/rng.hpp"

namespace fus {

namespace {

/// Runs fn(0..n-1) on up to `threads` workers. Each cell owns its models and
/// RNG streams, so results are independent of scheduling; outputs are merged
/// by cell index.
void run_cells(size_t n, int threads, const std::function<void(size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string config_echo(const RunConfig& cfg) {
    std::ostringstream out;
    bool first = true;
    const KvConfig kv = cfg.to_kv();
    for (const auto& [k, v] : kv.entries()) {
        if (!first) out << "; ";
        out << k << "=" << v;
        first = false;
    }
    return out.str();
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

SummaryStat summarize(const std::vector<double>& values) {
    SummaryStat s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    double sum = 0.0, best = values[0];
    for (double v : values) {
        sum += v;
        best = std::max(best, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    s.best = best;
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

// ---------------------------------------------------------------------------
// report JSON

std::string report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["kind"] = "fus-report";
    j["schema_version"] = report.schema_version;
    j["clean_accuracy"] = report.clean_accuracy;
    j["attack_success_rate"] = report.attack_success_rate;
    j["epsilon"] = report.epsilon;
    j["epsilon_pass"] = report.epsilon_pass;
    j["run_seed"] = report.run_seed;
    nlohmann::json cfg = nlohmann::json::object();
    const KvConfig kv = report.config.to_kv();
    for (const auto& [k, v] : kv.entries()) cfg[k] = v;
    j["config"] = cfg;
    j["pool"] = report.pool;
    j["train_loss"] = report.train_loss;
    j["clean_curve"] = report.clean_curve;
    return j.dump(2);
}

ExperimentReport report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report: bad JSON: ") + e.what());
    }
    if (j.value("kind", "") != "fus-report") throw DataError("report: not a fus-report file");
    ExperimentReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.attack_success_rate = j.at("attack_success_rate").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.epsilon_pass = j.at("epsilon_pass").get<bool>();
    r.run_seed = j.at("run_seed").get<uint64_t>();
    KvConfig kv;
    for (const auto& [k, v] : j.at("config").items()) kv.set(k, v.get<std::string>());
    r.config = RunConfig::from_kv(kv);
    r.pool = j.at("pool").get<std::vector<size_t>>();
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.clean_curve = j.at("clean_curve").get<std::vector<double>>();
    return r;
}

// ---------------------------------------------------------------------------
// Runner

Runner::Runner(RunConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.dataset_kind == "synthetic") {
        auto [tr, te] = make_synthetic(cfg_.synth);
        train_ = std::move(tr);
        test_ = std::move(te);
    } else if (cfg_.dataset_kind == "cifar10") {
        if (cfg_.dataset_dir.empty()) throw ConfigError("cifar10 dataset needs dataset.dir");
        auto [tr, te] = load_cifar10_binary(cfg_.dataset_dir);
        train_ = std::move(tr);
        test_ = std::move(te);
    } else if (cfg_.dataset_kind == "idx") {
        if (cfg_.idx_images.empty() || cfg_.idx_labels.empty() || cfg_.idx_test_images.empty() ||
            cfg_.idx_test_labels.empty()) {
            throw ConfigError("idx dataset needs idx.images/idx.labels/idx.test_images/idx.test_labels");
        }
        train_ = load_idx(cfg_.idx_images, cfg_.idx_labels, "train");
        test_ = load_idx(cfg_.idx_test_images, cfg_.idx_test_labels, "test");
        // label counts may differ between splits; reconcile to the larger
        train_.num_classes = test_.num_classes =
            std::max(train_.num_classes, test_.num_classes);
    } else {
        throw ConfigError("unknown dataset kind: " + cfg_.dataset_kind);
    }

    if (cfg_.subsample_per_class > 0) {
        train_ = subsample(train_, cfg_.subsample_per_class,
                           derive_seed(cfg_.seed, "data/subsample/train"));
    }
    if (cfg_.subsample_test_per_class > 0) {
        test_ = subsample(test_, cfg_.subsample_test_per_class,
                          derive_seed(cfg_.seed, "data/subsample/test"));
    }
    train_.validate();
    test_.validate();

    Trigger trig = cfg_.trigger_file.empty()
                       ? Trigger::checkerboard_noise(train_.channels, train_.height, train_.width,
                                                     cfg_.lambda, cfg_.trigger_seed)
                       : Trigger::from_raw_file(cfg_.trigger_file, train_.channels, train_.height,
                                                train_.width, cfg_.lambda);
    plan_.target = cfg_.target;
    plan_.ratio = cfg_.ratio;
    plan_.trigger = std::move(trig);
    plan_.validate(train_.num_classes);

    poisoned_test_ = build_poisoned_test(test_, plan_, cfg_.exclude_target);
}

std::unique_ptr<Model> Runner::train_infected(const SamplePool& pool,
                                              const VictimSettings& victim, uint64_t run_seed,
                                              CorrectnessTrace* trace,
                                              std::vector<double>* loss_curve,
                                              std::vector<double>* clean_curve) const {
    victim.schedule.validate();
    const Dims dims{train_.channels, train_.height, train_.width};
    auto model = make_model<float>(victim.arch, dims, train_.num_classes,
                                   derive_seed(run_seed, "model"));
    auto opt = make_optimizer<float>(victim.optimizer, victim.momentum, victim.weight_decay);
    MixedStream stream(train_, pool.indices(), plan_, victim.schedule.batch_size);
    TrainSchedule sched = victim.schedule;
    sched.seed = derive_seed(run_seed, "shuffle");

    std::vector<float> candidates;
    const size_t per = train_.image_size();
    if (trace) {
        candidates.reserve(pool.size() * per);
        for (size_t id : pool.indices()) {
            const auto fused = blend_fuse(train_.image(id), plan_.trigger.image,
                                          plan_.trigger.lambda);
            candidates.insert(candidates.end(), fused.begin(), fused.end());
        }
    }

    EpochHook hook;
    if (trace || clean_curve) {
        hook = [&](int epoch, Model& m) {
            if (trace) {
                const auto preds = predict_batched(m, candidates, pool.size(), per);
                std::vector<uint8_t> flags(preds.size());
                for (size_t i = 0; i < preds.size(); ++i) {
                    flags[i] = preds[i] == plan_.target ? 1 : 0;
                }
                trace->observe(epoch, flags);
            }
            if (clean_curve) clean_curve->push_back(clean_accuracy(m, test_));
        };
    }

    const FitStats stats = fit(*model, stream, sched, *opt, hook);
    if (loss_curve) *loss_curve = stats.epoch_loss;
    return model;
}

double Runner::attack_success_rate(Model& model) const {
    const auto preds = predict_dataset(model, poisoned_test_);
    size_t hits = 0;
    for (int p : preds) {
        if (p == plan_.target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

ForgettingTrainerFn Runner::forgetting_trainer(const VictimSettings& victim) const {
    return [this, victim](const SamplePool& pool, uint64_t train_seed) {
        CorrectnessTrace trace(pool.indices());
        train_infected(pool, victim, train_seed, &trace);
        return forgetting_counts(trace);
    };
}

SamplePool Runner::select_pool(const std::string& strategy, uint64_t seed) const {
    return select_pool(strategy, cfg_.ratio, cfg_.alpha, cfg_.iterations, cfg_.victim, seed);
}

SamplePool Runner::select_pool(const std::string& strategy, double ratio, double alpha,
                               int iterations, const VictimSettings& victim,
                               uint64_t seed) const {
    FusConfig fc;
    fc.ratio = ratio;
    fc.alpha = alpha;
    fc.arch = victim.arch;
    fc.schedule = victim.schedule;
    fc.seed = seed;
    if (strategy == "rss") {
        fc.iterations = 0;
        return fus_select(universe(), fc, ForgettingTrainerFn{});
    }
    if (strategy == "fus") {
        fc.iterations = iterations;
        return fus_select(universe(), fc, forgetting_trainer(victim));
    }
    throw ConfigError("unknown selection strategy: " + strategy);
}

ExperimentReport Runner::inject_and_evaluate(const SamplePool& pool, uint64_t run_seed,
                                             const VictimSettings& victim, bool record_curves,
                                             CorrectnessTrace* trace) const {
    ExperimentReport rep;
    rep.config = cfg_;
    rep.config.victim = victim;
    rep.run_seed = run_seed;
    rep.pool = pool.indices();
    auto model = train_infected(pool, victim, run_seed, trace, &rep.train_loss,
                                record_curves ? &rep.clean_curve : nullptr);
    rep.clean_accuracy = clean_accuracy(*model, test_);
    rep.attack_success_rate = attack_success_rate(*model);
    rep.epsilon = cfg_.epsilon;
    rep.epsilon_pass = cfg_.epsilon < 0 || rep.clean_accuracy >= cfg_.epsilon;
    return rep;
}

ExperimentReport Runner::inject_and_evaluate(const SamplePool& pool, uint64_t run_seed) const {
    return inject_and_evaluate(pool, run_seed, cfg_.victim);
}

double Runner::clean_twin_accuracy(const VictimSettings& victim, uint64_t run_seed) const {
    auto model = train_infected(SamplePool{}, victim, run_seed);
    return clean_accuracy(*model, test_);
}

// ---------------------------------------------------------------------------
// studies

WhiteboxResult whitebox_curve(const Runner& runner, const std::vector<double>& r_list,
                              int fus_repeats, int rss_repeats) {
    if (r_list.empty()) throw ConfigError("whitebox: empty mixing-ratio list");
    if (fus_repeats < 1 || rss_repeats < 1) throw ConfigError("whitebox: repeats must be >= 1");
    const RunConfig& cfg = runner.config();

    struct Cell {
        size_t r_index;
        const char* strategy;
        int rep;
    };
    std::vector<Cell> cells;
    for (size_t ri = 0; ri < r_list.size(); ++ri) {
        for (int j = 0; j < fus_repeats; ++j) cells.push_back({ri, "fus", j});
        for (int j = 0; j < rss_repeats; ++j) cells.push_back({ri, "rss", j});
    }

    WhiteboxResult result;
    result.rows.resize(cells.size());
    run_cells(cells.size(), cfg.threads, [&](size_t i) {
        const Cell& cell = cells[i];
        const double r = r_list[cell.r_index];
        const uint64_t master =
            derive_seed(cfg.seed, "whitebox/" + std::string(cell.strategy) + "/r" +
                                      std::to_string(cell.r_index) + "/rep" +
                                      std::to_string(cell.rep));
        const SamplePool pool = runner.select_pool(cell.strategy, r, cfg.alpha, cfg.iterations,
                                                   cfg.victim, master);
        const ExperimentReport rep = runner.inject_and_evaluate(pool, derive_seed(master, "inject"));
        result.rows[i] = {r, cell.strategy, cell.rep, master, rep.attack_success_rate,
                          rep.clean_accuracy};
    });

    for (const char* strategy : {"fus", "rss"}) {
        auto& curve = std::string(strategy) == "fus" ? result.fus_curve : result.rss_curve;
        for (size_t ri = 0; ri < r_list.size(); ++ri) {
            std::vector<double> asrs;
            for (const auto& row : result.rows) {
                if (row.strategy == strategy && row.ratio == r_list[ri]) asrs.push_back(row.asr);
            }
            const SummaryStat s = summarize(asrs);
            curve.push_back({r_list[ri], s.best, s.mean, s.stddev});
        }
    }
    return result;
}

namespace {

std::vector<std::pair<double, double>> monotone_curve(const std::vector<CurvePoint>& curve,
                                                      bool use_best) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(curve.size());
    for (const auto& p : curve) pts.emplace_back(p.ratio, use_best ? p.best_asr : p.mean_asr);
    std::sort(pts.begin(), pts.end());
    // isotonic clip: running max
    for (size_t i = 1; i < pts.size(); ++i) {
        pts[i].second = std::max(pts[i].second, pts[i - 1].second);
    }
    return pts;
}

}  // namespace

std::vector<SavingsCell> volume_savings(const std::vector<CurvePoint>& fus_curve,
                                        const std::vector<CurvePoint>& rss_curve,
                                        bool use_best) {
    if (fus_curve.empty() || rss_curve.empty()) {
        throw ConfigError("volume savings: empty curve");
    }
    const auto fus = monotone_curve(fus_curve, use_best);
    const auto rss = monotone_curve(rss_curve, use_best);

    std::vector<SavingsCell> out;
    out.reserve(fus.size());
    for (const auto& [r_fus, asr] : fus) {
        SavingsCell cell;
        cell.ratio_fus = r_fus;
        cell.asr = asr;
        if (asr < rss.front().second || asr > rss.back().second) {
            cell.computable = false;
            out.push_back(cell);
            continue;
        }
        // leftmost segment containing asr
        double r_eq = rss.front().first;
        for (size_t j = 0; j + 1 <= rss.size(); ++j) {
            if (asr <= rss[j].second) {
                r_eq = rss[j].first;
                if (j > 0 && rss[j].second > rss[j - 1].second) {
                    const double t = (asr - rss[j - 1].second) / (rss[j].second - rss[j - 1].second);
                    r_eq = rss[j - 1].first + t * (rss[j].first - rss[j - 1].first);
                }
                break;
            }
        }
        cell.ratio_rss_equiv = r_eq;
        cell.percent = r_eq > 0 ? r_fus / r_eq * 100.0 : 0.0;
        cell.computable = true;
        out.push_back(cell);
    }
    return out;
}

RemovalResult removal_experiment(const Runner& runner, const std::vector<double>& percents,
                                 int repeats) {
    for (double p : percents) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("removal: percentage " + std::to_string(p) + " outside [0,1]");
        }
    }
    if (repeats < 1) throw ConfigError("removal: repeats must be >= 1");
    const RunConfig& cfg = runner.config();
    const size_t m = runner.nominal_pool_size();

    RemovalResult result;
    result.percents = percents;
    result.rows.resize(static_cast<size_t>(repeats) * percents.size() * 2);

    run_cells(static_cast<size_t>(repeats), cfg.threads, [&](size_t rep) {
        const uint64_t master = derive_seed(cfg.seed, "removal/rep" + std::to_string(rep));
        const SamplePool pool =
            rss_select(runner.universe(), m, derive_seed(master, "select/init"));

        CorrectnessTrace trace(pool.indices());
        runner.train_infected(pool, cfg.victim, derive_seed(master, "counts"), &trace);
        const ForgettingCounts counts = forgetting_counts(trace);

        // fixed removal orders per repeat: nested removals as the percentage grows
        std::vector<size_t> selective_order = pool.indices();
        {
            Rng tie_rng(derive_seed(master, "selective/tie"));
            tie_rng.shuffle(selective_order);
            std::stable_sort(selective_order.begin(), selective_order.end(),
                             [&](size_t a, size_t b) { return counts.for_id(a) < counts.for_id(b); });
        }
        std::vector<size_t> random_order = pool.indices();
        {
            Rng rng(derive_seed(master, "random/order"));
            rng.shuffle(random_order);
        }

        for (size_t pi = 0; pi < percents.size(); ++pi) {
            const size_t k =
                static_cast<size_t>(std::floor(percents[pi] * static_cast<double>(m) + 0.5));
            const uint64_t inject_seed = derive_seed(master, "inject/p" + std::to_string(pi));
            auto eval_kept = [&](const std::vector<size_t>& order) {
                std::vector<size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(k),
                                         order.end());
                const SamplePool reduced =
                    SamplePool::from_indices(std::move(kept), runner.universe());
                return runner.inject_and_evaluate(reduced, inject_seed).attack_success_rate;
            };
            const double asr_sel = eval_kept(selective_order);
            // both orders coincide when nothing or everything is removed
            const double asr_rand = (k == 0 || k == m) ? asr_sel : eval_kept(random_order);
            const size_t base = (rep * percents.size() + pi) * 2;
            result.rows[base] = {static_cast<int>(rep), "selective", percents[pi], asr_sel};
            result.rows[base + 1] = {static_cast<int>(rep), "random", percents[pi], asr_rand};
        }
    });

    for (size_t pi = 0; pi < percents.size(); ++pi) {
        std::vector<double> sel, rnd;
        for (const auto& row : result.rows) {
            if (row.percent != percents[pi]) continue;
            (row.order == "selective" ? sel : rnd).push_back(row.asr);
        }
        result.selective_mean.push_back(summarize(sel).mean);
        result.random_mean.push_back(summarize(rnd).mean);
    }
    return result;
}

std::vector<VolumeHistRow> candidate_volume_experiment(const Runner& runner,
                                                       const std::vector<double>& r_list) {
    for (size_t i = 1; i < r_list.size(); ++i) {
        if (r_list[i] <= r_list[i - 1]) {
            throw ConfigError("candidate volume: r list must be ascending");
        }
    }
    const RunConfig& cfg = runner.config();
    std::vector<VolumeHistRow> rows(r_list.size());
    run_cells(r_list.size(), cfg.threads, [&](size_t i) {
        const uint64_t master = derive_seed(cfg.seed, "volume/r" + std::to_string(i));
        const size_t m = pool_size(r_list[i], runner.universe());
        const SamplePool pool =
            rss_select(runner.universe(), m, derive_seed(master, "select/init"));
        CorrectnessTrace trace(pool.indices());
        runner.train_infected(pool, cfg.victim, derive_seed(master, "train"), &trace);
        const ForgettingCounts counts = forgetting_counts(trace);
        VolumeHistRow row;
        row.ratio = r_list[i];
        row.pool_size = m;
        row.fractions = histogram(counts, 2);
        row.bucket_counts.assign(row.fractions.size(), 0);
        for (int c : counts.counts) {
            row.bucket_counts[static_cast<size_t>(std::min(c, 2))] += 1;
        }
        rows[i] = std::move(row);
    });
    return rows;
}

BlackboxResult blackbox_matrix(const Runner& runner, const RunMatrix& matrix) {
    if (matrix.selection.empty() || matrix.injection.empty()) {
        throw ConfigError("blackbox: empty matrix axis");
    }
    if (matrix.repeats < 1) throw ConfigError("blackbox: repeats must be >= 1");
    const RunConfig& cfg = runner.config();

    BlackboxResult result;
    result.matrix = matrix;
    result.grid.assign(matrix.selection.size(),
                       std::vector<BlackboxCell>(matrix.injection.size()));

    // per selection setting and repeat: one fus pool and its rss twin
    struct PoolPair {
        SamplePool fus, rss;
        uint64_t master = 0;
    };
    std::vector<std::vector<PoolPair>> pools(matrix.selection.size());
    for (auto& v : pools) v.resize(static_cast<size_t>(matrix.repeats));

    run_cells(matrix.selection.size() * static_cast<size_t>(matrix.repeats), cfg.threads,
              [&](size_t flat) {
                  const size_t si = flat / static_cast<size_t>(matrix.repeats);
                  const size_t rep = flat % static_cast<size_t>(matrix.repeats);
                  const SelectionSetting& sel = matrix.selection[si];
                  const uint64_t master =
                      derive_seed(cfg.seed, "blackbox/sel" + std::to_string(si) + "/rep" +
                                                std::to_string(rep));
                  PoolPair pair;
                  pair.master = master;
                  pair.fus = runner.select_pool("fus", sel.ratio, cfg.alpha, cfg.iterations,
                                                sel.victim, master);
                  pair.rss = runner.select_pool("rss", sel.ratio, cfg.alpha, cfg.iterations,
                                                sel.victim, master);
                  pools[si][rep] = std::move(pair);
              });

    // asr per (selection, injection, repeat, strategy)
    std::vector<std::vector<std::vector<double>>> asr_fus(
        matrix.selection.size(),
        std::vector<std::vector<double>>(matrix.injection.size(),
                                         std::vector<double>(matrix.repeats)));
    auto asr_rss = asr_fus;

    const size_t total = matrix.selection.size() * matrix.injection.size() *
                         static_cast<size_t>(matrix.repeats);
    run_cells(total, cfg.threads, [&](size_t flat) {
        const size_t per_sel = matrix.injection.size() * static_cast<size_t>(matrix.repeats);
        const size_t si = flat / per_sel;
        const size_t ij = (flat % per_sel) / static_cast<size_t>(matrix.repeats);
        const size_t rep = flat % static_cast<size_t>(matrix.repeats);
        const PoolPair& pair = pools[si][rep];
        const uint64_t inject_seed = derive_seed(pair.master, "inject/t" + std::to_string(ij));
        const VictimSettings& victim = matrix.injection[ij];
        asr_fus[si][ij][rep] =
            runner.inject_and_evaluate(pair.fus, inject_seed, victim).attack_success_rate;
        asr_rss[si][ij][rep] =
            runner.inject_and_evaluate(pair.rss, inject_seed, victim).attack_success_rate;
    });

    for (size_t si = 0; si < matrix.selection.size(); ++si) {
        for (size_t ij = 0; ij < matrix.injection.size(); ++ij) {
            BlackboxCell cell;
            cell.asr_fus = summarize(asr_fus[si][ij]).mean;
            cell.asr_rss = summarize(asr_rss[si][ij]).mean;
            cell.delta = cell.asr_fus - cell.asr_rss;
            result.grid[si][ij] = cell;
        }
    }

    // volume savings per injection setting, over selection groups that share
    // victim settings and differ only in r
    std::vector<std::string> group_labels(matrix.selection.size());
    for (size_t si = 0; si < matrix.selection.size(); ++si) {
        group_labels[si] = matrix.selection[si].victim.short_label();
    }
    std::vector<std::string> unique_groups = group_labels;
    std::sort(unique_groups.begin(), unique_groups.end());
    unique_groups.erase(std::unique(unique_groups.begin(), unique_groups.end()),
                        unique_groups.end());

    for (const std::string& group : unique_groups) {
        std::vector<size_t> members;
        for (size_t si = 0; si < matrix.selection.size(); ++si) {
            if (group_labels[si] == group) members.push_back(si);
        }
        if (members.size() < 2) continue;  // no curve to interpolate
        for (size_t ij = 0; ij < matrix.injection.size(); ++ij) {
            std::vector<CurvePoint> fus_curve, rss_curve;
            for (size_t si : members) {
                fus_curve.push_back(
                    {matrix.selection[si].ratio, 0.0, result.grid[si][ij].asr_fus, 0.0});
                rss_curve.push_back(
                    {matrix.selection[si].ratio, 0.0, result.grid[si][ij].asr_rss, 0.0});
            }
            const auto savings = volume_savings(fus_curve, rss_curve, /*use_best=*/false);
            for (const auto& cell : savings) {
                result.savings.push_back(
                    {matrix.injection[ij].short_label(), group, cell});
            }
        }
    }
    return result;
}

std::vector<AlphaCell> ablation_alpha(const Runner& runner, const std::vector<double>& alpha_list,
                                      const std::vector<double>& r_list, int repeats) {
    if (alpha_list.empty() || r_list.empty()) throw ConfigError("alpha ablation: empty axis");
    if (repeats < 1) throw ConfigError("alpha ablation: repeats must be >= 1");
    const RunConfig& cfg = runner.config();

    struct Cell {
        size_t ai, ri;
        int rep;
    };
    std::vector<Cell> cells;
    for (size_t ai = 0; ai < alpha_list.size(); ++ai) {
        for (size_t ri = 0; ri < r_list.size(); ++ri) {
            for (int rep = 0; rep < repeats; ++rep) cells.push_back({ai, ri, rep});
        }
    }
    std::vector<double> asrs(cells.size());
    run_cells(cells.size(), cfg.threads, [&](size_t i) {
        const Cell& cell = cells[i];
        const uint64_t master = derive_seed(
            cfg.seed, "alpha/a" + std::to_string(cell.ai) + "/r" + std::to_string(cell.ri) +
                          "/rep" + std::to_string(cell.rep));
        const SamplePool pool =
            runner.select_pool("fus", r_list[cell.ri], alpha_list[cell.ai], cfg.iterations,
                               cfg.victim, master);
        asrs[i] = runner.inject_and_evaluate(pool, derive_seed(master, "inject"))
                      .attack_success_rate;
    });

    std::vector<AlphaCell> out;
    for (size_t ai = 0; ai < alpha_list.size(); ++ai) {
        for (size_t ri = 0; ri < r_list.size(); ++ri) {
            std::vector<double> vals;
            for (size_t i = 0; i < cells.size(); ++i) {
                if (cells[i].ai == ai && cells[i].ri == ri) vals.push_back(asrs[i]);
            }
            const SummaryStat s = summarize(vals);
            out.push_back({alpha_list[ai], r_list[ri], s.mean, s.stddev, s.n});
        }
    }
    return out;
}

IterationCurve ablation_iterations(const Runner& runner, int n_max, int repeats) {
    if (n_max < 1) throw ConfigError("iteration ablation: n_max must be >= 1");
    if (repeats < 1) throw ConfigError("iteration ablation: repeats must be >= 1");
    const RunConfig& cfg = runner.config();
    const size_t m = runner.nominal_pool_size();
    const size_t k = pool_size(cfg.alpha, m);
    const auto trainer = runner.forgetting_trainer(cfg.victim);

    std::vector<std::vector<double>> asr(static_cast<size_t>(repeats),
                                         std::vector<double>(static_cast<size_t>(n_max) + 1));
    run_cells(static_cast<size_t>(repeats), cfg.threads, [&](size_t rep) {
        const uint64_t master = derive_seed(cfg.seed, "iterations/rep" + std::to_string(rep));
        // same child-seed labels as fus_select, so the pool after n rounds is
        // exactly fus_select(iterations=n, seed=master)
        SamplePool pool = rss_select(runner.universe(), m, derive_seed(master, "select/init"));
        asr[rep][0] = runner.inject_and_evaluate(pool, derive_seed(master, "eval/n0"))
                          .attack_success_rate;
        for (int n = 1; n <= n_max; ++n) {
            const std::string tag = "select/iter" + std::to_string(n);
            const ForgettingCounts counts = trainer(pool, derive_seed(master, tag + "/train"));
            pool = filter_lowest(pool, counts, k, derive_seed(master, tag + "/tie"));
            pool = refill(pool, runner.universe(), k, derive_seed(master, tag + "/refill"));
            asr[rep][static_cast<size_t>(n)] =
                runner.inject_and_evaluate(pool, derive_seed(master, "eval/n" + std::to_string(n)))
                    .attack_success_rate;
        }
    });

    IterationCurve curve;
    curve.repeats = repeats;
    for (int n = 0; n <= n_max; ++n) {
        std::vector<double> vals;
        for (int rep = 0; rep < repeats; ++rep) vals.push_back(asr[rep][static_cast<size_t>(n)]);
        const SummaryStat s = summarize(vals);
        curve.mean_asr.push_back(s.mean);
        curve.stddev.push_back(s.stddev);
    }
    return curve;
}

std::vector<size_t> attribution_class_hist(const SamplePool& pool, const Dataset& ds) {
    std::vector<size_t> hist(static_cast<size_t>(ds.num_classes), 0);
    for (size_t id : pool.indices()) {
        if (id >= ds.size()) throw ConfigError("attribution: pool index out of range");
        hist[static_cast<size_t>(ds.labels[id])] += 1;
    }
    return hist;
}

SamplePool class_matched_rss(const Dataset& ds, const std::vector<size_t>& class_counts,
                             uint64_t seed) {
    if (class_counts.size() != static_cast<size_t>(ds.num_classes)) {
        throw ConfigError("class-matched rss: histogram size != num classes");
    }
    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(ds.num_classes));
    for (size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<size_t>(ds.labels[i])].push_back(i);
    }
    Rng rng(derive_seed(seed, "matched"));
    std::vector<size_t> chosen;
    for (int c = 0; c < ds.num_classes; ++c) {
        const auto& members = by_class[static_cast<size_t>(c)];
        const size_t demand = class_counts[static_cast<size_t>(c)];
        if (demand > members.size()) {
            throw DataError("class-matched rss: class " + std::to_string(c) + " demand " +
                            std::to_string(demand) + " exceeds population " +
                            std::to_string(members.size()));
        }
        for (size_t slot : rng.sample_without_replacement(members.size(), demand)) {
            chosen.push_back(members[slot]);
        }
    }
    return SamplePool::from_indices(std::move(chosen), ds.size());
}

DistMatchResult distribution_matched_rss(const Runner& runner, const SamplePool& fus_pool,
                                         int repeats) {
    if (repeats < 1) throw ConfigError("distribution match: repeats must be >= 1");
    const RunConfig& cfg = runner.config();
    const size_t m = fus_pool.size();

    DistMatchResult result;
    result.matched_hist = attribution_class_hist(fus_pool, runner.train_set());
    result.rows.resize(static_cast<size_t>(repeats) * 2);

    run_cells(static_cast<size_t>(repeats), cfg.threads, [&](size_t rep) {
        const uint64_t seed_u =
            derive_seed(cfg.seed, "distmatch/uniform/rep" + std::to_string(rep));
        const SamplePool pool_u =
            rss_select(runner.universe(), m, derive_seed(seed_u, "select/init"));
        const double asr_u = runner.inject_and_evaluate(pool_u, derive_seed(seed_u, "inject"))
                                 .attack_success_rate;

        const uint64_t seed_m =
            derive_seed(cfg.seed, "distmatch/matched/rep" + std::to_string(rep));
        const SamplePool pool_m = class_matched_rss(runner.train_set(), result.matched_hist,
                                                    seed_m);
        const double asr_m = runner.inject_and_evaluate(pool_m, derive_seed(seed_m, "inject"))
                                 .attack_success_rate;

        result.rows[rep * 2] = {static_cast<int>(rep), "uniform", asr_u};
        result.rows[rep * 2 + 1] = {static_cast<int>(rep), "matched", asr_m};
    });

    std::vector<double> us, ms;
    for (const auto& row : result.rows) {
        (row.distribution == "uniform" ? us : ms).push_back(row.asr);
    }
    result.uniform = summarize(us);
    result.matched = summarize(ms);
    return result;
}

// ---------------------------------------------------------------------------
// CSV output

namespace {

void csv_preamble(std::ostream& out, const std::string& study) {
    out << "# fus-csv v1 study=" << study << "\n";
}

}  // namespace

void write_whitebox_csv(const WhiteboxResult& result, const Runner& runner, std::ostream& out) {
    csv_preamble(out, "whitebox");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "ratio,strategy,rep,seed,asr,clean_accuracy,config\n";
    for (const auto& row : result.rows) {
        out << row.ratio << ',' << row.strategy << ',' << row.rep << ',' << row.seed << ','
            << row.asr << ',' << row.clean << ',' << echo << "\n";
    }
}

void write_savings_csv(const std::vector<SavingsCell>& savings, const Runner& runner,
                       std::ostream& out) {
    csv_preamble(out, "volume");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "ratio_fus,asr,ratio_rss_equiv,percent,computable,config\n";
    for (const auto& cell : savings) {
        out << cell.ratio_fus << ',' << cell.asr << ',';
        if (cell.computable) {
            out << cell.ratio_rss_equiv << ',' << cell.percent << ",1,";
        } else {
            out << ",,0,";
        }
        out << echo << "\n";
    }
}

void write_removal_csv(const RemovalResult& result, const Runner& runner, std::ostream& out) {
    csv_preamble(out, "removal");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "rep,order,percent,asr,config\n";
    for (const auto& row : result.rows) {
        out << row.rep << ',' << row.order << ',' << row.percent << ',' << row.asr << ',' << echo
            << "\n";
    }
}

void write_volume_hist_csv(const std::vector<VolumeHistRow>& rows, const Runner& runner,
                           std::ostream& out) {
    csv_preamble(out, "candidate-volume");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "ratio,pool_size,frac_0,frac_1,frac_2plus,count_0,count_1,count_2plus,config\n";
    for (const auto& row : rows) {
        out << row.ratio << ',' << row.pool_size << ',' << row.fractions[0] << ','
            << row.fractions[1] << ',' << row.fractions[2] << ',' << row.bucket_counts[0] << ','
            << row.bucket_counts[1] << ',' << row.bucket_counts[2] << ',' << echo << "\n";
    }
}

void write_blackbox_csv(const BlackboxResult& result, const Runner& runner, std::ostream& out) {
    csv_preamble(out, "blackbox");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "selection,selection_ratio,injection,asr_fus,asr_rss,delta,config\n";
    for (size_t si = 0; si < result.matrix.selection.size(); ++si) {
        for (size_t ij = 0; ij < result.matrix.injection.size(); ++ij) {
            const auto& cell = result.grid[si][ij];
            out << csv_quote(result.matrix.selection[si].victim.short_label()) << ','
                << result.matrix.selection[si].ratio << ','
                << csv_quote(result.matrix.injection[ij].short_label()) << ',' << cell.asr_fus
                << ',' << cell.asr_rss << ',' << cell.delta << ',' << echo << "\n";
        }
    }
    if (!result.savings.empty()) {
        out << "\n# savings\n";
        out << "injection,selection_group,ratio_fus,asr,ratio_rss_equiv,percent,computable\n";
        for (const auto& row : result.savings) {
            out << csv_quote(row.injection_label) << ',' << csv_quote(row.selection_group) << ','
                << row.cell.ratio_fus << ',' << row.cell.asr << ',';
            if (row.cell.computable) {
                out << row.cell.ratio_rss_equiv << ',' << row.cell.percent << ",1\n";
            } else {
                out << ",,0\n";
            }
        }
    }
}

void write_alpha_csv(const std::vector<AlphaCell>& cells, const Runner& runner,
                     std::ostream& out) {
    csv_preamble(out, "alpha");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "alpha,ratio,mean_asr,stddev,repeats,config\n";
    for (const auto& cell : cells) {
        out << cell.alpha << ',' << cell.ratio << ',' << cell.mean_asr << ',' << cell.stddev
            << ',' << cell.repeats << ',' << echo << "\n";
    }
}

void write_iterations_csv(const IterationCurve& curve, const Runner& runner, std::ostream& out) {
    csv_preamble(out, "iterations");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "n,mean_asr,stddev,repeats,config\n";
    for (size_t n = 0; n < curve.mean_asr.size(); ++n) {
        out << n << ',' << curve.mean_asr[n] << ',' << curve.stddev[n] << ',' << curve.repeats
            << ',' << echo << "\n";
    }
}

void write_attribution_csv(const std::vector<size_t>& hist, const Runner& runner,
                           std::ostream& out) {
    csv_preamble(out, "attribution");
    const std::string echo = csv_quote(config_echo(runner.config()));
    const auto& names = runner.train_set().class_names;
    out << "class,class_name,count,config\n";
    for (size_t c = 0; c < hist.size(); ++c) {
        out << c << ',' << (c < names.size() ? csv_quote(names[c]) : std::string()) << ','
            << hist[c] << ',' << echo << "\n";
    }
}

void write_distmatch_csv(const DistMatchResult& result, const Runner& runner, std::ostream& out) {
    csv_preamble(out, "distmatch");
    const std::string echo = csv_quote(config_echo(runner.config()));
    out << "rep,distribution,asr,config\n";
    for (const auto& row : result.rows) {
        out << row.rep << ',' << row.distribution << ',' << row.asr << ',' << echo << "\n";
    }
}

}  // namespace fus
