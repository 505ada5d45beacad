#include "fus/poison.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "fus/error.hpp"
#include "fus/rng.hpp"

namespace fus {

void Trigger::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw ConfigError("trigger: non-positive dims");
    }
    if (image.size() != pixel_count()) throw ConfigError("trigger: image/dims mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("trigger: lambda outside [0,1]");
    for (float v : image) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("trigger: pixel outside [0,1]");
    }
}

Trigger Trigger::checkerboard_noise(int channels, int height, int width, double lambda,
                                    uint64_t seed) {
    Trigger t;
    t.channels = channels;
    t.height = height;
    t.width = width;
    t.lambda = lambda;
    t.image.resize(t.pixel_count());
    Rng rng(derive_seed(seed, "trigger/checkerboard"));
    // 2x2 checker cells; one random intensity per cell per channel, parity
    // pushes cells toward opposite extremes
    const int cells_y = (height + 1) / 2, cells_x = (width + 1) / 2;
    std::vector<float> cell(static_cast<size_t>(channels) * cells_y * cells_x);
    for (size_t i = 0; i < cell.size(); ++i) {
        const size_t cy = (i / cells_x) % cells_y, cx = i % cells_x;
        const bool dark = ((cy + cx) % 2) == 0;
        const double u = rng.uniform();
        cell[i] = static_cast<float>(dark ? 0.25 * u : 1.0 - 0.25 * u);
    }
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const size_t ci = (static_cast<size_t>(c) * cells_y + y / 2) * cells_x + x / 2;
                t.image[(static_cast<size_t>(c) * height + y) * width + x] = cell[ci];
            }
        }
    }
    t.validate();
    return t;
}

Trigger Trigger::from_raw_file(const std::string& path, int channels, int height, int width,
                               double lambda) {
    Trigger t;
    t.channels = channels;
    t.height = height;
    t.width = width;
    t.lambda = lambda;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open trigger file " + path);
    t.image.resize(t.pixel_count());
    if (!in.read(reinterpret_cast<char*>(t.image.data()),
                 static_cast<std::streamsize>(t.image.size() * sizeof(float)))) {
        throw DataError(path + ": expected " + std::to_string(t.image.size()) + " float32 values");
    }
    t.validate();
    return t;
}

void Trigger::save_raw(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size() * sizeof(float)));
    if (!out) throw DataError("write failed: " + path);
}

void PoisonPlan::validate(int num_classes) const {
    if (target < 0 || target >= num_classes) {
        throw ConfigError("plan: target class " + std::to_string(target) + " outside [0, " +
                          std::to_string(num_classes) + ")");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("plan: mixing ratio must be in (0,1)");
    trigger.validate();
}

std::vector<float> blend_fuse(std::span<const float> x, std::span<const float> k, double lambda) {
    if (x.size() != k.size()) {
        throw ConfigError("blend_fuse: image size " + std::to_string(x.size()) +
                          " != trigger size " + std::to_string(k.size()));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("blend_fuse: lambda outside [0,1]");
    const float lam = static_cast<float>(lambda);
    std::vector<float> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = std::clamp(lam * k[i] + (1.0f - lam) * x[i], 0.0f, 1.0f);
    }
    return out;
}

CandidateView::CandidateView(const Dataset& clean, const PoisonPlan& plan)
    : clean_(&clean), plan_(&plan) {
    plan.validate(clean.num_classes);
    if (clean.image_size() != plan.trigger.pixel_count()) {
        throw ConfigError("candidate view: trigger shape does not match dataset images");
    }
}

std::pair<std::vector<float>, int> CandidateView::candidate(size_t i) const {
    if (i >= clean_->size()) {
        throw ConfigError("candidate index " + std::to_string(i) + " out of range");
    }
    return {blend_fuse(clean_->image(i), plan_->trigger.image, plan_->trigger.lambda),
            plan_->target};
}

Dataset build_poisoned_test(const Dataset& test, const PoisonPlan& plan, bool exclude_target) {
    plan.validate(test.num_classes);
    if (test.image_size() != plan.trigger.pixel_count()) {
        throw ConfigError("poisoned test: trigger shape does not match dataset images");
    }
    Dataset v;
    v.channels = test.channels;
    v.height = test.height;
    v.width = test.width;
    v.num_classes = test.num_classes;
    v.split = "test";
    v.class_names = test.class_names;
    for (size_t i = 0; i < test.size(); ++i) {
        if (exclude_target && test.labels[i] == plan.target) continue;
        const auto fused = blend_fuse(test.image(i), plan.trigger.image, plan.trigger.lambda);
        v.images.insert(v.images.end(), fused.begin(), fused.end());
        v.labels.push_back(plan.target);
    }
    if (v.size() == 0) {
        throw DataError("poisoned test set is empty (all samples excluded)");
    }
    return v;
}

MixedStream::MixedStream(const Dataset& clean, std::vector<size_t> pool_indices,
                         const PoisonPlan& plan, int batch_size)
    : clean_(&clean), pool_(std::move(pool_indices)), plan_(&plan), batch_size_(batch_size) {
    if (batch_size <= 0) throw ConfigError("mixed stream: batch size must be positive");
    plan.validate(clean.num_classes);
    std::unordered_set<size_t> seen;
    for (size_t idx : pool_) {
        if (idx >= clean.size()) {
            throw ConfigError("mixed stream: pool index " + std::to_string(idx) + " out of range");
        }
        if (!seen.insert(idx).second) {
            throw ConfigError("mixed stream: duplicate pool index " + std::to_string(idx));
        }
    }
    order_.resize(clean.size() + pool_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
}

void MixedStream::begin_epoch(int, uint64_t seed) {
    Rng rng(seed);
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
    rng.shuffle(order_);
    cursor_ = 0;
}

bool MixedStream::next(Batch& out) {
    if (cursor_ >= order_.size()) return false;
    const size_t count = std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
    const size_t per = clean_->image_size();
    out.size = static_cast<int>(count);
    out.images.resize(count * per);
    out.labels.resize(count);
    const size_t n_clean = clean_->size();
    for (size_t i = 0; i < count; ++i) {
        const size_t id = order_[cursor_ + i];
        float* dst = out.images.data() + i * per;
        if (id < n_clean) {
            const auto img = clean_->image(id);
            std::copy(img.begin(), img.end(), dst);
            out.labels[i] = clean_->labels[id];
        } else {
            const size_t src = pool_[id - n_clean];
            const auto fused =
                blend_fuse(clean_->image(src), plan_->trigger.image, plan_->trigger.lambda);
            std::copy(fused.begin(), fused.end(), dst);
            out.labels[i] = plan_->target;
        }
    }
    cursor_ += count;
    return true;
}

}  // namespace fus
