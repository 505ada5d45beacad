#include "fus/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fus/error.hpp"
#include "fus/rng.hpp"

namespace fus {

SamplePool SamplePool::from_indices(std::vector<size_t> indices, size_t universe_size) {
    std::sort(indices.begin(), indices.end());
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= universe_size) {
            throw ConfigError("pool: index " + std::to_string(indices[i]) +
                              " outside universe of " + std::to_string(universe_size));
        }
        if (i > 0 && indices[i] == indices[i - 1]) {
            throw ConfigError("pool: duplicate index " + std::to_string(indices[i]));
        }
    }
    SamplePool p;
    p.idx_ = std::move(indices);
    return p;
}

bool SamplePool::contains(size_t id) const {
    return std::binary_search(idx_.begin(), idx_.end(), id);
}

size_t pool_size(double ratio, size_t universe_size) {
    return static_cast<size_t>(std::floor(ratio * static_cast<double>(universe_size) + 0.5));
}

SamplePool rss_select(size_t universe_size, size_t m, uint64_t seed) {
    if (m > universe_size) {
        throw ConfigError("rss_select: m (" + std::to_string(m) + ") exceeds universe (" +
                          std::to_string(universe_size) + ")");
    }
    Rng rng(seed);
    return SamplePool::from_indices(rng.sample_without_replacement(universe_size, m),
                                    universe_size);
}

SamplePool filter_lowest(const SamplePool& pool, const ForgettingCounts& counts, size_t k_remove,
                         uint64_t tie_seed) {
    if (k_remove > pool.size()) {
        throw ConfigError("filter_lowest: k_remove exceeds pool size");
    }
    if (k_remove == 0) return pool;

    std::vector<std::pair<int, size_t>> by_count;
    by_count.reserve(pool.size());
    for (size_t id : pool.indices()) {
        by_count.emplace_back(counts.for_id(id), id);  // throws on missing coverage
    }
    std::sort(by_count.begin(), by_count.end());

    // everything strictly below the cut count goes; the remainder is drawn
    // uniformly from the tied group at the cut
    const int cut_count = by_count[k_remove - 1].first;
    std::vector<size_t> removed;
    std::vector<size_t> tied;
    for (const auto& [c, id] : by_count) {
        if (c < cut_count) {
            removed.push_back(id);
        } else if (c == cut_count) {
            tied.push_back(id);
        }
    }
    const size_t need_from_tied = k_remove - removed.size();
    Rng rng(tie_seed);
    for (size_t slot : rng.sample_without_replacement(tied.size(), need_from_tied)) {
        removed.push_back(tied[slot]);
    }
    std::sort(removed.begin(), removed.end());

    std::vector<size_t> kept;
    kept.reserve(pool.size() - k_remove);
    std::set_difference(pool.indices().begin(), pool.indices().end(), removed.begin(),
                        removed.end(), std::back_inserter(kept));
    // universe bound already validated by the source pool
    return SamplePool::from_indices(std::move(kept), SIZE_MAX);
}

SamplePool refill(const SamplePool& pool, size_t universe_size, size_t k_add, uint64_t seed) {
    std::vector<size_t> complement;
    complement.reserve(universe_size - pool.size());
    const auto& have = pool.indices();
    size_t at = 0;
    for (size_t id = 0; id < universe_size; ++id) {
        if (at < have.size() && have[at] == id) {
            ++at;
        } else {
            complement.push_back(id);
        }
    }
    if (k_add > complement.size()) {
        throw ConfigError("refill: need " + std::to_string(k_add) + " fresh indices but only " +
                          std::to_string(complement.size()) + " remain outside the pool");
    }
    std::vector<size_t> merged = have;
    Rng rng(seed);
    for (size_t slot : rng.sample_without_replacement(complement.size(), k_add)) {
        merged.push_back(complement[slot]);
    }
    return SamplePool::from_indices(std::move(merged), universe_size);
}

void FusConfig::validate(size_t universe_size) const {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("fus: ratio must be in (0,1)");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("fus: alpha must be in (0,1]");
    if (iterations < 0) throw ConfigError("fus: iterations must be >= 0");
    const size_t m = pool_size(ratio, universe_size);
    if (m == 0) throw ConfigError("fus: pool size rounds to zero");
    if (m > universe_size) throw ConfigError("fus: pool size exceeds universe");
    if (iterations > 0 && pool_size(alpha, m) < 1) {
        throw ConfigError("fus: alpha*m rounds to zero, no sample would be replaced");
    }
}

SamplePool fus_select(size_t universe_size, const FusConfig& cfg,
                      const ForgettingTrainerFn& trainer) {
    cfg.validate(universe_size);
    const size_t m = pool_size(cfg.ratio, universe_size);
    const size_t k = pool_size(cfg.alpha, m);  // round(alpha * m), half up

    SamplePool pool = rss_select(universe_size, m, derive_seed(cfg.seed, "select/init"));
    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const std::string tag = "select/iter" + std::to_string(iter);
        const ForgettingCounts counts = trainer(pool, derive_seed(cfg.seed, tag + "/train"));
        pool = filter_lowest(pool, counts, k, derive_seed(cfg.seed, tag + "/tie"));
        pool = refill(pool, universe_size, k, derive_seed(cfg.seed, tag + "/refill"));
        if (pool.size() != m) {
            throw Error("fus: pool size invariant broken at iteration " + std::to_string(iter) +
                        ": " + std::to_string(pool.size()) + " != " + std::to_string(m));
        }
    }
    return pool;
}

void save_pool(const SamplePool& pool, double ratio, double alpha, int iterations, uint64_t seed,
               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "# fus pool v1\n";
    out << "# r=" << ratio << " alpha=" << alpha << " n=" << iterations << " seed=" << seed
        << "\n";
    for (size_t id : pool.indices()) out << id << '\n';
    if (!out) throw DataError("write failed: " + path);
}

SamplePool load_pool(const std::string& path, size_t universe_size, PoolFileHeader* header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pool file " + path);
    std::vector<size_t> indices;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header) {
                std::istringstream hs(line.substr(1));
                std::string tok;
                while (hs >> tok) {
                    const auto eq = tok.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string key = tok.substr(0, eq);
                    const std::string val = tok.substr(eq + 1);
                    if (key == "r") header->ratio = std::stod(val);
                    else if (key == "alpha") header->alpha = std::stod(val);
                    else if (key == "n") header->iterations = std::stoi(val);
                    else if (key == "seed") header->seed = std::stoull(val);
                }
            }
            continue;
        }
        try {
            indices.push_back(std::stoull(line));
        } catch (const std::exception&) {
            throw DataError(path + ": bad index line '" + line + "'");
        }
    }
    return SamplePool::from_indices(std::move(indices), universe_size);
}

}  // namespace fus
