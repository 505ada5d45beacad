#include "fus/trainer.hpp"

#include <cmath>

#include "fus/rng.hpp"

namespace fus {

double train_step(Model& model, const Batch& batch, Optimizer<float>& opt, double lr, int epoch,
                  int step) {
    model.zero_grads();
    const double loss = model.loss_and_backward(batch.images, batch.labels, batch.size);
    if (!std::isfinite(loss)) throw TrainingDiverged(epoch, step);
    opt.step(model.params(), lr);
    return loss;
}

FitStats fit(Model& model, BatchStream& stream, const TrainSchedule& schedule,
             Optimizer<float>& opt, const EpochHook& hook) {
    schedule.validate();
    FitStats stats;
    stats.epoch_loss.reserve(static_cast<size_t>(schedule.epochs));
    Batch batch;
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        const double lr = step_lr(schedule, epoch);
        stream.begin_epoch(epoch, derive_seed(schedule.seed, "epoch/" + std::to_string(epoch)));
        double loss_sum = 0.0;
        int steps = 0;
        while (stream.next(batch)) {
            loss_sum += train_step(model, batch, opt, lr, epoch, steps);
            ++steps;
        }
        stats.epoch_loss.push_back(steps > 0 ? loss_sum / steps : 0.0);
        if (hook) hook(epoch, model);
    }
    return stats;
}

std::vector<int> predict_batched(Model& model, const std::vector<float>& data, size_t n,
                                 size_t per_sample, int eval_batch) {
    std::vector<int> out;
    out.reserve(n);
    std::vector<float> chunk;
    for (size_t at = 0; at < n; at += static_cast<size_t>(eval_batch)) {
        const size_t count = std::min(static_cast<size_t>(eval_batch), n - at);
        chunk.assign(data.begin() + static_cast<std::ptrdiff_t>(at * per_sample),
                     data.begin() + static_cast<std::ptrdiff_t>((at + count) * per_sample));
        const auto& logits = model.forward_raw(chunk, static_cast<int>(count));
        const auto preds = model.argmax_rows(logits, static_cast<int>(count));
        out.insert(out.end(), preds.begin(), preds.end());
    }
    return out;
}

std::vector<int> predict_dataset(Model& model, const Dataset& ds, int eval_batch) {
    return predict_batched(model, ds.images, ds.size(), ds.image_size(), eval_batch);
}

double clean_accuracy(Model& model, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("accuracy over an empty dataset");
    const auto preds = predict_dataset(model, ds);
    size_t hits = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == ds.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace fus
