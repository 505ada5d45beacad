#pragma once

#include <stdexcept>
#include <string>

namespace fus {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user-supplied configuration: shape mismatches, invalid hyperparameters,
/// unknown architecture or optimizer ids.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or missing input data: truncated files, bad magic numbers,
/// out-of-range labels.
class DataError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(int epoch, int step)
        : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                ", step " + std::to_string(step)),
          epoch(epoch),
          step(step) {}

    int epoch;
    int step;
};

}  // namespace fus
