#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fus/error.hpp"

namespace fus {

/// Step learning-rate schedule: lr starts at initial_lr and is divided by
/// drop_factor at each epoch in drop_epochs.
struct TrainSchedule {
    int epochs = 60;
    double initial_lr = 0.01;
    std::vector<int> drop_epochs = {30, 50};
    double drop_factor = 10.0;
    int batch_size = 64;
    uint64_t seed = 0;

    void validate() const {
        if (epochs < 0) throw ConfigError("schedule: epochs must be >= 0");
        if (initial_lr <= 0) throw ConfigError("schedule: learning rate must be positive");
        if (drop_factor <= 0) throw ConfigError("schedule: drop factor must be positive");
        if (batch_size <= 0) throw ConfigError("schedule: batch size must be positive");
        int prev = -1;
        for (int e : drop_epochs) {
            if (e <= prev) throw ConfigError("schedule: drop epochs must be strictly increasing");
            if (e >= epochs) throw ConfigError("schedule: drop epoch beyond total epochs");
            prev = e;
        }
    }
};

inline double step_lr(const TrainSchedule& s, int epoch) {
    if (epoch < 0 || epoch >= s.epochs) {
        throw ConfigError("step_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(s.epochs) + ")");
    }
    double lr = s.initial_lr;
    for (int e : s.drop_epochs) {
        if (epoch >= e) lr /= s.drop_factor;
    }
    return lr;
}

}  // namespace fus
