#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fus/dataset.hpp"
#include "fus/schedule.hpp"

namespace fus {

/// Flat `key = value` config text: one pair per line, '#' comments, blank
/// lines ignored. Order-insensitive; unknown keys are rejected by the typed
/// loaders so typos surface early.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse(const std::string& text);
    static KvConfig load(const std::string& path);

    bool has(const std::string& key) const { return map_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { map_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return map_; }
    std::string to_text() const;

private:
    std::map<std::string, std::string> map_;
};

/// Victim-side training knobs; the black-box grid varies these while the
/// selection side stays fixed.
struct VictimSettings {
    std::string arch = "small-cnn";
    std::string optimizer = "sgd";
    double momentum = 0.9;
    double weight_decay = 5e-4;
    TrainSchedule schedule;

    std::string short_label() const;
};

/// Everything one run needs; echoed verbatim into every report so any result
/// can be reproduced bit-exactly from its config.
struct RunConfig {
    // data
    std::string dataset_kind = "synthetic";  // synthetic | cifar10 | idx
    std::string dataset_dir;                 // cifar10 batch directory
    std::string idx_images;
    std::string idx_labels;
    std::string idx_test_images;
    std::string idx_test_labels;
    SyntheticSpec synth;
    int subsample_per_class = 0;       // 0 = keep everything
    int subsample_test_per_class = 0;  // 0 = keep everything

    // victim training
    VictimSettings victim;

    // attack
    double lambda = 0.15;
    int target = 0;
    double ratio = 0.01;
    double alpha = 0.5;
    int iterations = 10;
    std::string strategy = "fus";  // fus | rss
    std::string trigger_file;      // empty -> seeded checkerboard
    uint64_t trigger_seed = 7;
    bool exclude_target = true;
    double epsilon = -1.0;  // <0 = unset (derive from a clean twin or skip)

    // reproducibility / execution
    uint64_t seed = 1;
    int threads = 1;

    static RunConfig from_kv(const KvConfig& kv);
    static RunConfig from_file(const std::string& path);
    KvConfig to_kv() const;
};

}  // namespace fus
