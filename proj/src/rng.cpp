#include "fus/rng.hpp"

#include <algorithm>
#include <numeric>

#include "fus/error.hpp"

namespace fus {

std::vector<size_t> Rng::sample_without_replacement(size_t universe, size_t m) {
    if (m > universe) {
        throw ConfigError("sample_without_replacement: m (" + std::to_string(m) +
                          ") exceeds universe size (" + std::to_string(universe) + ")");
    }
    // partial Fisher-Yates: after m swaps the prefix holds the sample
    std::vector<size_t> pool(universe);
    std::iota(pool.begin(), pool.end(), size_t{0});
    for (size_t i = 0; i < m; ++i) {
        const size_t j = i + static_cast<size_t>(below(universe - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace fus
