#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fus/dataset.hpp"
#include "fus/trainer.hpp"

namespace fus {

/// Fixed trigger pattern plus its blend ratio.
struct Trigger {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> image;  // C x H x W in [0,1]
    double lambda = 0.15;

    size_t pixel_count() const { return static_cast<size_t>(channels) * height * width; }
    void validate() const;

    /// Deterministic default trigger: a checkerboard whose cell intensities
    /// come from a seeded stream.
    static Trigger checkerboard_noise(int channels, int height, int width, double lambda,
                                      uint64_t seed);

    /// Raw little-endian float32 C*H*W file.
    static Trigger from_raw_file(const std::string& path, int channels, int height, int width,
                                 double lambda);
    void save_raw(const std::string& path) const;
};

/// Attack definition: where poisoned samples point and how many there are.
struct PoisonPlan {
    int target = 0;
    double ratio = 0.01;  // |U| / |D|
    Trigger trigger;

    void validate(int num_classes) const;
};

/// x' = lambda*k + (1-lambda)*x, clamped to [0,1].
std::vector<float> blend_fuse(std::span<const float> x, std::span<const float> k, double lambda);

/// The candidate set: every clean sample with the trigger fused and the label
/// forced to the target. Nothing is materialized; candidate(i) is pure.
class CandidateView {
public:
    CandidateView(const Dataset& clean, const PoisonPlan& plan);

    size_t size() const { return clean_->size(); }
    std::pair<std::vector<float>, int> candidate(size_t i) const;
    const Dataset& clean() const { return *clean_; }
    const PoisonPlan& plan() const { return *plan_; }

private:
    const Dataset* clean_;
    const PoisonPlan* plan_;
};

/// Poisoned test set: every test image fused, every label set to the target.
/// With exclude_target, samples whose true class already equals the target
/// are left out.
Dataset build_poisoned_test(const Dataset& test, const PoisonPlan& plan,
                            bool exclude_target = true);

/// Training stream over D and the pooled candidates: each epoch is a seeded
/// global shuffle of every clean sample plus every pooled candidate (fused,
/// target-labeled).
class MixedStream final : public BatchStream {
public:
    MixedStream(const Dataset& clean, std::vector<size_t> pool_indices, const PoisonPlan& plan,
                int batch_size);

    void begin_epoch(int epoch, uint64_t seed) override;
    bool next(Batch& out) override;
    size_t samples_per_epoch() const override { return order_.size(); }

private:
    const Dataset* clean_;
    std::vector<size_t> pool_;
    const PoisonPlan* plan_;
    int batch_size_;
    std::vector<uint32_t> order_;  // [0,|D|) clean, |D|+j -> pool_[j] fused
    size_t cursor_ = 0;
};

}  // namespace fus
