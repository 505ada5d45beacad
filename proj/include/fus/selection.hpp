#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fus/dynamics.hpp"
#include "fus/schedule.hpp"

namespace fus {

/// Set of unique indices into the clean training set, identifying which
/// candidates form the poisoned set. Stored sorted; public operations keep
/// the size at the nominal m = round(r * |D|).
class SamplePool {
public:
    SamplePool() = default;

    static SamplePool from_indices(std::vector<size_t> indices, size_t universe_size);

    size_t size() const { return idx_.size(); }
    bool empty() const { return idx_.empty(); }
    const std::vector<size_t>& indices() const { return idx_; }
    bool contains(size_t id) const;

    bool operator==(const SamplePool&) const = default;

private:
    std::vector<size_t> idx_;  // sorted, unique
};

/// Nominal pool size: round(ratio * universe), rounding half up.
size_t pool_size(double ratio, size_t universe_size);

/// Random selection strategy: m indices uniform without replacement.
SamplePool rss_select(size_t universe_size, size_t m, uint64_t seed);

/// Drop exactly k_remove members in order of forgetting events from small to
/// large; members tied at the cut are chosen uniformly under tie_seed.
SamplePool filter_lowest(const SamplePool& pool, const ForgettingCounts& counts, size_t k_remove,
                         uint64_t tie_seed);

/// Add k_add fresh indices drawn uniformly from the complement of the pool.
SamplePool refill(const SamplePool& pool, size_t universe_size, size_t k_add, uint64_t seed);

struct FusConfig {
    double ratio = 0.01;       // r
    double alpha = 0.5;        // filtration ratio
    int iterations = 10;       // N
    std::string arch = "small-cnn";
    TrainSchedule schedule;
    uint64_t seed = 0;

    void validate(size_t universe_size) const;
};

/// Trains an infected model from scratch on D plus the pool's candidates and
/// returns forgetting counts for every pool member. Supplied by the
/// experiment layer (or stubbed in tests).
using ForgettingTrainerFn = std::function<ForgettingCounts(const SamplePool&, uint64_t train_seed)>;

/// Filtering-and-updating loop: start from a random pool, then N rounds of
/// (train, drop the round(alpha*m) least-forgotten, refill randomly).
/// iterations == 0 returns the initial random pool unchanged. All per-round
/// seeds derive from cfg.seed: "select/init", "select/iter<i>/train",
/// "select/iter<i>/tie", "select/iter<i>/refill".
SamplePool fus_select(size_t universe_size, const FusConfig& cfg,
                      const ForgettingTrainerFn& trainer);

/// Pool file: '#'-prefixed header echoing (r, alpha, n, seed), then one
/// index per line.
void save_pool(const SamplePool& pool, double ratio, double alpha, int iterations, uint64_t seed,
               const std::string& path);

struct PoolFileHeader {
    double ratio = 0.0;
    double alpha = 0.0;
    int iterations = 0;
    uint64_t seed = 0;
};

SamplePool load_pool(const std::string& path, size_t universe_size,
                     PoolFileHeader* header = nullptr);

}  // namespace fus
