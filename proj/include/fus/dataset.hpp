#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fus {

/// Labeled image set. Pixels live in [0,1] as floats from the moment of
/// loading; byte quantization only happens in the optional binary export.
struct Dataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<float> images;  // N x C x H x W, row-major
    std::vector<int> labels;
    std::string split;  // "train" | "test"
    std::vector<std::string> class_names;

    size_t size() const { return labels.size(); }
    size_t image_size() const { return static_cast<size_t>(channels) * height * width; }

    std::span<const float> image(size_t i) const {
        return std::span<const float>(images.data() + i * image_size(), image_size());
    }

    /// Throws DataError if any invariant is broken: images/labels aligned,
    /// labels within [0, K), pixels within [0, 1].
    void validate() const;
};

/// Standard CIFAR-10 binary batches: data_batch_1..5.bin plus test_batch.bin,
/// 3073-byte records (1 label byte, then 3x32x32 pixel bytes in planes).
std::pair<Dataset, Dataset> load_cifar10_binary(const std::string& dir_path);

/// One file of CIFAR-style records with arbitrary geometry; record count is
/// derived from the file size.
Dataset load_cifar_style(const std::string& path, int channels, int height, int width,
                         int num_classes, const std::string& split);

/// Byte-quantized export in the same record layout (round-to-nearest).
void write_cifar_style(const Dataset& ds, const std::string& path);

/// IDX-format pair (big-endian, magic 0x00000803 images / 0x00000801 labels).
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split = "train");

struct SyntheticSpec {
    int num_classes = 10;
    int per_class = 1000;
    int channels = 1;
    int height = 16;
    int width = 16;
    double noise_sigma = 0.35;
    uint64_t seed = 0;
};

/// Synthetic corpus: one smooth per-class template, samples are template +
/// Gaussian pixel noise clamped to [0,1]. Test split holds per_class/5
/// samples per class (at least one), drawn from the same templates.
std::pair<Dataset, Dataset> make_synthetic(const SyntheticSpec& spec);

/// Balanced deterministic subset: per_class samples from every class.
Dataset subsample(const Dataset& ds, int per_class, uint64_t seed);

}  // namespace fus
