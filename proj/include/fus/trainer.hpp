#pragma once

#include <functional>
#include <vector>

#include "fus/dataset.hpp"
#include "fus/model.hpp"
#include "fus/optim.hpp"
#include "fus/schedule.hpp"

namespace fus {

struct Batch {
    std::vector<float> images;
    std::vector<int> labels;
    int size = 0;
};

/// One epoch's worth of (input, label) batches. begin_epoch fixes the order
/// for that epoch from the given seed; next() fills batches until the epoch
/// is exhausted. The final batch may be partial.
class BatchStream {
public:
    virtual ~BatchStream() = default;
    virtual void begin_epoch(int epoch, uint64_t seed) = 0;
    virtual bool next(Batch& out) = 0;
    virtual size_t samples_per_epoch() const = 0;
};

/// One SGD step on one batch; returns the mean cross-entropy. epoch/step are
/// only used to annotate a divergence error.
double train_step(Model& model, const Batch& batch, Optimizer<float>& opt, double lr,
                  int epoch = -1, int step = -1);

using EpochHook = std::function<void(int epoch, Model& model)>;

struct FitStats {
    std::vector<double> epoch_loss;  // mean over the epoch's batches
};

/// Full training loop: schedule.epochs epochs over the stream, per-epoch
/// order seeded from schedule.seed, hook invoked after every epoch.
/// Identical (seed, config, data) reproduces parameters bit-exactly.
FitStats fit(Model& model, BatchStream& stream, const TrainSchedule& schedule,
             Optimizer<float>& opt, const EpochHook& hook = nullptr);

/// Argmax labels for n samples stored contiguously, evaluated in chunks.
std::vector<int> predict_batched(Model& model, const std::vector<float>& data, size_t n,
                                 size_t per_sample, int eval_batch = 256);

std::vector<int> predict_dataset(Model& model, const Dataset& ds, int eval_batch = 256);

double clean_accuracy(Model& model, const Dataset& ds);

}  // namespace fus
