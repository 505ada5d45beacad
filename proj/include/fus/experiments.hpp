#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fus/config.hpp"
#include "fus/dataset.hpp"
#include "fus/dynamics.hpp"
#include "fus/model.hpp"
#include "fus/poison.hpp"
#include "fus/selection.hpp"
#include "fus/trainer.hpp"

namespace fus {

/// Outcome of one injection run, with everything needed to reproduce it.
struct ExperimentReport {
    int schema_version = 1;
    double clean_accuracy = 0.0;
    double attack_success_rate = 0.0;
    double epsilon = -1.0;  // clean-accuracy floor; <0 = not set
    bool epsilon_pass = true;
    uint64_t run_seed = 0;
    RunConfig config;          // echo, with the victim settings actually used
    std::vector<size_t> pool;  // injected pool indices
    std::vector<double> train_loss;
    std::vector<double> clean_curve;  // per-epoch test accuracy, when recorded
};

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double best = 0.0;
    int n = 0;
};
SummaryStat summarize(const std::vector<double>& values);

/// Owns the datasets and attack plan for one configuration and runs
/// injections against them. Individual runs are single-threaded and fully
/// determined by their run seed, so study loops may execute runs in
/// parallel.
class Runner {
public:
    explicit Runner(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    const Dataset& train_set() const { return train_; }
    const Dataset& test_set() const { return test_; }
    const Dataset& poisoned_test_set() const { return poisoned_test_; }
    const PoisonPlan& plan() const { return plan_; }
    size_t universe() const { return train_.size(); }
    size_t nominal_pool_size() const { return pool_size(cfg_.ratio, train_.size()); }

    /// Train a victim from scratch on D plus the pool's candidates. When
    /// trace is given, epoch-end correctness of every pool candidate is
    /// recorded into it.
    std::unique_ptr<Model> train_infected(const SamplePool& pool, const VictimSettings& victim,
                                          uint64_t run_seed, CorrectnessTrace* trace = nullptr,
                                          std::vector<double>* loss_curve = nullptr,
                                          std::vector<double>* clean_curve = nullptr) const;

    double attack_success_rate(Model& model) const;

    /// Adapter handed to fus_select: trains with the configured victim
    /// settings and returns the pool's forgetting counts.
    ForgettingTrainerFn forgetting_trainer(const VictimSettings& victim) const;

    /// strategy "rss" or "fus", using the config's (r, alpha, N). Both paths
    /// derive the initial pool from the same "select/init" child seed, so
    /// fus with N = 0 and rss coincide.
    SamplePool select_pool(const std::string& strategy, uint64_t seed) const;
    SamplePool select_pool(const std::string& strategy, double ratio, double alpha,
                           int iterations, const VictimSettings& victim, uint64_t seed) const;

    ExperimentReport inject_and_evaluate(const SamplePool& pool, uint64_t run_seed,
                                         const VictimSettings& victim,
                                         bool record_curves = false,
                                         CorrectnessTrace* trace = nullptr) const;
    ExperimentReport inject_and_evaluate(const SamplePool& pool, uint64_t run_seed) const;

    /// Accuracy of a clean-trained twin (empty pool, same seed path).
    double clean_twin_accuracy(const VictimSettings& victim, uint64_t run_seed) const;

private:
    RunConfig cfg_;
    Dataset train_, test_;
    PoisonPlan plan_;
    Dataset poisoned_test_;
};

// ---------------------------------------------------------------------------
// studies

struct WhiteboxRow {
    double ratio = 0.0;
    std::string strategy;
    int rep = 0;
    uint64_t seed = 0;
    double asr = 0.0;
    double clean = 0.0;
};

struct CurvePoint {
    double ratio = 0.0;
    double best_asr = 0.0;
    double mean_asr = 0.0;
    double stddev = 0.0;
};

struct WhiteboxResult {
    std::vector<WhiteboxRow> rows;
    std::vector<CurvePoint> fus_curve;
    std::vector<CurvePoint> rss_curve;
};

/// Best/mean ASR per (mixing ratio, strategy) over repeats with distinct
/// seeds.
WhiteboxResult whitebox_curve(const Runner& runner, const std::vector<double>& r_list,
                              int fus_repeats, int rss_repeats);

struct SavingsCell {
    double ratio_fus = 0.0;
    double asr = 0.0;
    double ratio_rss_equiv = 0.0;
    double percent = 0.0;  // ratio_fus / ratio_rss_equiv * 100
    bool computable = false;
};

/// Poisoned-volume savings by linear interpolation: for each point of the
/// fus curve, the ratio at which the rss curve reaches the same ASR. Curves
/// are made monotone first by a running-max clip. use_best selects best-run
/// curves, otherwise means.
std::vector<SavingsCell> volume_savings(const std::vector<CurvePoint>& fus_curve,
                                        const std::vector<CurvePoint>& rss_curve,
                                        bool use_best = true);

struct RemovalRow {
    int rep = 0;
    std::string order;  // "selective" | "random"
    double percent = 0.0;
    double asr = 0.0;
};

struct RemovalResult {
    std::vector<double> percents;
    std::vector<double> selective_mean;
    std::vector<double> random_mean;
    std::vector<RemovalRow> rows;
};

/// Remove a growing fraction of an RSS pool (by ascending forgetting count
/// vs. uniformly at random), retrain and measure ASR at each step.
RemovalResult removal_experiment(const Runner& runner, const std::vector<double>& percents,
                                 int repeats);

struct VolumeHistRow {
    double ratio = 0.0;
    size_t pool_size = 0;
    std::vector<double> fractions;     // buckets {0, 1, >=2}
    std::vector<size_t> bucket_counts; // same buckets, absolute
};

/// Forgetting-count histogram of an RSS pool as the mixing ratio grows.
std::vector<VolumeHistRow> candidate_volume_experiment(const Runner& runner,
                                                       const std::vector<double>& r_list);

struct SelectionSetting {
    VictimSettings victim;
    double ratio = 0.01;
};

/// Grid definition: selection-time settings (rows) by injection-time
/// settings (columns); every cell resolves to seeded runs.
struct RunMatrix {
    std::vector<SelectionSetting> selection;
    std::vector<VictimSettings> injection;
    int repeats = 1;
};

struct BlackboxCell {
    double asr_fus = 0.0;  // mean over repeats
    double asr_rss = 0.0;
    double delta = 0.0;
};

struct BlackboxSavingsRow {
    std::string injection_label;
    std::string selection_group;  // victim label of the selection settings
    SavingsCell cell;
};

struct BlackboxResult {
    RunMatrix matrix;
    std::vector<std::vector<BlackboxCell>> grid;  // [selection][injection]
    std::vector<BlackboxSavingsRow> savings;
};

/// Transferability grid: ASR(FUS) - ASR(RSS) when pools chosen under one
/// setting are injected under another, plus volume savings where the
/// selection settings form curves over r.
BlackboxResult blackbox_matrix(const Runner& runner, const RunMatrix& matrix);

struct AlphaCell {
    double alpha = 0.0;
    double ratio = 0.0;
    double mean_asr = 0.0;
    double stddev = 0.0;
    int repeats = 0;
};

std::vector<AlphaCell> ablation_alpha(const Runner& runner, const std::vector<double>& alpha_list,
                                      const std::vector<double>& r_list, int repeats);

struct IterationCurve {
    std::vector<double> mean_asr;  // index n = pool after n filter+refill rounds
    std::vector<double> stddev;
    int repeats = 0;
};

/// ASR of the evolving pool after each FUS round, averaged over repeats. The
/// n-th snapshot equals fus_select run with iterations = n and the same
/// seed.
IterationCurve ablation_iterations(const Runner& runner, int n_max, int repeats);

/// Ground-truth class counts of the pooled samples.
std::vector<size_t> attribution_class_hist(const SamplePool& pool, const Dataset& ds);

/// RSS constrained to a fixed per-class demand.
SamplePool class_matched_rss(const Dataset& ds, const std::vector<size_t>& class_counts,
                             uint64_t seed);

struct DistMatchRow {
    int rep = 0;
    std::string distribution;  // "uniform" | "matched"
    double asr = 0.0;
};

struct DistMatchResult {
    SummaryStat uniform;
    SummaryStat matched;
    std::vector<size_t> matched_hist;
    std::vector<DistMatchRow> rows;
};

/// Does matching the FUS pool's class distribution alone reproduce its
/// effect? RSS pools drawn under the matched distribution vs. uniform.
DistMatchResult distribution_matched_rss(const Runner& runner, const SamplePool& fus_pool,
                                         int repeats);

// ---------------------------------------------------------------------------
// CSV output (one row per cell, config echo in the last column)

void write_whitebox_csv(const WhiteboxResult& result, const Runner& runner, std::ostream& out);
void write_savings_csv(const std::vector<SavingsCell>& savings, const Runner& runner,
                       std::ostream& out);
void write_removal_csv(const RemovalResult& result, const Runner& runner, std::ostream& out);
void write_volume_hist_csv(const std::vector<VolumeHistRow>& rows, const Runner& runner,
                           std::ostream& out);
void write_blackbox_csv(const BlackboxResult& result, const Runner& runner, std::ostream& out);
void write_alpha_csv(const std::vector<AlphaCell>& cells, const Runner& runner,
                     std::ostream& out);
void write_iterations_csv(const IterationCurve& curve, const Runner& runner, std::ostream& out);
void write_attribution_csv(const std::vector<size_t>& hist, const Runner& runner,
                           std::ostream& out);
void write_distmatch_csv(const DistMatchResult& result, const Runner& runner, std::ostream& out);

}  // namespace fus
