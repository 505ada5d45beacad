#include "fus/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "fus/error.hpp"
#include "fus/rng.hpp"

namespace fus {

void Dataset::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw DataError("dataset: non-positive image dims");
    }
    if (num_classes < 1) throw DataError("dataset: num_classes must be >= 1");
    if (images.size() != labels.size() * image_size()) {
        throw DataError("dataset: image buffer does not match label count");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw DataError("dataset: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        }
    }
    for (float v : images) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("dataset: pixel outside [0,1]");
        }
    }
}

Dataset load_cifar_style(const std::string& path, int channels, int height, int width,
                         int num_classes, const std::string& split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<size_t>(in.tellg());
    in.seekg(0);

    const size_t pixels = static_cast<size_t>(channels) * height * width;
    const size_t record = 1 + pixels;
    if (file_size == 0 || file_size % record != 0) {
        throw DataError(path + ": size " + std::to_string(file_size) +
                        " is not a multiple of the record size " + std::to_string(record));
    }
    const size_t n = file_size / record;

    Dataset ds;
    ds.channels = channels;
    ds.height = height;
    ds.width = width;
    ds.num_classes = num_classes;
    ds.split = split;
    ds.labels.reserve(n);
    ds.images.reserve(n * pixels);

    std::vector<unsigned char> buf(record);
    for (size_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record))) {
            throw DataError(path + ": truncated record " + std::to_string(i));
        }
        const int label = buf[0];
        if (label >= num_classes) {
            throw DataError(path + ": record " + std::to_string(i) + " has label byte " +
                            std::to_string(label) + " >= " + std::to_string(num_classes));
        }
        ds.labels.push_back(label);
        for (size_t p = 0; p < pixels; ++p) {
            ds.images.push_back(static_cast<float>(buf[1 + p]) / 255.0f);
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> load_cifar10_binary(const std::string& dir_path) {
    Dataset train;
    for (int i = 1; i <= 5; ++i) {
        Dataset part = load_cifar_style(dir_path + "/data_batch_" + std::to_string(i) + ".bin",
                                        3, 32, 32, 10, "train");
        if (i == 1) {
            train = std::move(part);
        } else {
            train.images.insert(train.images.end(), part.images.begin(), part.images.end());
            train.labels.insert(train.labels.end(), part.labels.begin(), part.labels.end());
        }
    }
    Dataset test = load_cifar_style(dir_path + "/test_batch.bin", 3, 32, 32, 10, "test");
    static const char* names[] = {"airplane", "automobile", "bird",  "cat",  "deer",
                                  "dog",      "frog",       "horse", "ship", "truck"};
    train.class_names.assign(names, names + 10);
    test.class_names = train.class_names;
    train.validate();
    test.validate();
    return {std::move(train), std::move(test)};
}

void write_cifar_style(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    const size_t pixels = ds.image_size();
    std::vector<unsigned char> buf(1 + pixels);
    for (size_t i = 0; i < ds.size(); ++i) {
        buf[0] = static_cast<unsigned char>(ds.labels[i]);
        const auto img = ds.image(i);
        for (size_t p = 0; p < pixels; ++p) {
            const float v = img[p] * 255.0f;
            buf[1 + p] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 255.0f)));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw DataError("write failed: " + path);
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw DataError(path + ": truncated header");
    }
    return (uint32_t{b[0]} << 24) | (uint32_t{b[1]} << 16) | (uint32_t{b[2]} << 8) | uint32_t{b[3]};
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw DataError("cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw DataError("cannot open " + labels_path);

    const uint32_t img_magic = read_be32(imgs, images_path);
    if (img_magic != 0x00000803u) {
        throw DataError(images_path + ": bad magic (expected 0x00000803)");
    }
    const uint32_t n_img = read_be32(imgs, images_path);
    const uint32_t rows = read_be32(imgs, images_path);
    const uint32_t cols = read_be32(imgs, images_path);

    const uint32_t lab_magic = read_be32(labs, labels_path);
    if (lab_magic != 0x00000801u) {
        throw DataError(labels_path + ": bad magic (expected 0x00000801)");
    }
    const uint32_t n_lab = read_be32(labs, labels_path);
    if (n_img != n_lab) {
        throw DataError("idx: image count " + std::to_string(n_img) + " != label count " +
                        std::to_string(n_lab));
    }

    Dataset ds;
    ds.channels = 1;
    ds.height = static_cast<int>(rows);
    ds.width = static_cast<int>(cols);
    ds.split = split;
    ds.labels.reserve(n_lab);
    ds.images.reserve(static_cast<size_t>(n_img) * rows * cols);

    std::vector<unsigned char> img_buf(static_cast<size_t>(rows) * cols);
    int max_label = 0;
    for (uint32_t i = 0; i < n_img; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(img_buf.data()),
                       static_cast<std::streamsize>(img_buf.size()))) {
            throw DataError(images_path + ": truncated image " + std::to_string(i));
        }
        unsigned char lab;
        if (!labs.read(reinterpret_cast<char*>(&lab), 1)) {
            throw DataError(labels_path + ": truncated label " + std::to_string(i));
        }
        ds.labels.push_back(lab);
        max_label = std::max(max_label, static_cast<int>(lab));
        for (unsigned char px : img_buf) ds.images.push_back(static_cast<float>(px) / 255.0f);
    }
    ds.num_classes = max_label + 1;
    ds.validate();
    return ds;
}

namespace {

/// Smooth class template: a coarse seeded grid upsampled bilinearly, scaled
/// into [0.15, 0.85] so noise has headroom before clamping.
std::vector<float> make_template(int channels, int height, int width, Rng& rng) {
    constexpr int G = 4;
    std::vector<float> out(static_cast<size_t>(channels) * height * width);
    for (int c = 0; c < channels; ++c) {
        std::array<double, G * G> grid{};
        for (double& g : grid) g = rng.uniform();
        for (int y = 0; y < height; ++y) {
            const double gy = (static_cast<double>(y) + 0.5) / height * (G - 1);
            const int y0 = std::min(static_cast<int>(gy), G - 2);
            const double fy = gy - y0;
            for (int x = 0; x < width; ++x) {
                const double gx = (static_cast<double>(x) + 0.5) / width * (G - 1);
                const int x0 = std::min(static_cast<int>(gx), G - 2);
                const double fx = gx - x0;
                const double v00 = grid[y0 * G + x0], v01 = grid[y0 * G + x0 + 1];
                const double v10 = grid[(y0 + 1) * G + x0], v11 = grid[(y0 + 1) * G + x0 + 1];
                const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                 fy * ((1 - fx) * v10 + fx * v11);
                out[(static_cast<size_t>(c) * height + y) * width + x] =
                    static_cast<float>(0.15 + 0.7 * v);
            }
        }
    }
    return out;
}

void fill_split(Dataset& ds, const std::vector<std::vector<float>>& templates, int per_class,
                double sigma, Rng& rng) {
    const size_t pixels = ds.image_size();
    const size_t n = static_cast<size_t>(ds.num_classes) * per_class;
    ds.images.reserve(n * pixels);
    ds.labels.reserve(n);
    for (int c = 0; c < ds.num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            ds.labels.push_back(c);
            for (size_t p = 0; p < pixels; ++p) {
                const double v = templates[c][p] + sigma * rng.normal();
                ds.images.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
            }
        }
    }
}

}  // namespace

std::pair<Dataset, Dataset> make_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2) throw ConfigError("synthetic: need at least 2 classes");
    if (spec.per_class <= 0 || spec.channels <= 0 || spec.height <= 0 || spec.width <= 0) {
        throw ConfigError("synthetic: non-positive dimension");
    }
    Dataset train, test;
    for (Dataset* d : {&train, &test}) {
        d->channels = spec.channels;
        d->height = spec.height;
        d->width = spec.width;
        d->num_classes = spec.num_classes;
    }
    train.split = "train";
    test.split = "test";

    Rng template_rng(derive_seed(spec.seed, "synthetic/templates"));
    std::vector<std::vector<float>> templates;
    templates.reserve(spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        templates.push_back(make_template(spec.channels, spec.height, spec.width, template_rng));
    }

    Rng train_rng(derive_seed(spec.seed, "synthetic/train"));
    fill_split(train, templates, spec.per_class, spec.noise_sigma, train_rng);

    const int test_per_class = std::max(1, spec.per_class / 5);
    Rng test_rng(derive_seed(spec.seed, "synthetic/test"));
    fill_split(test, templates, test_per_class, spec.noise_sigma, test_rng);

    train.validate();
    test.validate();
    return {std::move(train), std::move(test)};
}

Dataset subsample(const Dataset& ds, int per_class, uint64_t seed) {
    if (per_class < 0) throw ConfigError("subsample: per_class must be >= 0");
    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(ds.num_classes));
    for (size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<size_t>(ds.labels[i])].push_back(i);
    }

    Rng rng(derive_seed(seed, "subsample"));
    std::vector<size_t> chosen;
    chosen.reserve(static_cast<size_t>(per_class) * ds.num_classes);
    for (int c = 0; c < ds.num_classes; ++c) {
        auto& members = by_class[static_cast<size_t>(c)];
        if (members.size() < static_cast<size_t>(per_class)) {
            throw DataError("subsample: class " + std::to_string(c) + " has only " +
                            std::to_string(members.size()) + " members, need " +
                            std::to_string(per_class));
        }
        const auto picks = rng.sample_without_replacement(members.size(), static_cast<size_t>(per_class));
        for (size_t p : picks) chosen.push_back(members[p]);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.channels = ds.channels;
    out.height = ds.height;
    out.width = ds.width;
    out.num_classes = ds.num_classes;
    out.split = ds.split;
    out.class_names = ds.class_names;
    out.labels.reserve(chosen.size());
    out.images.reserve(chosen.size() * ds.image_size());
    for (size_t i : chosen) {
        out.labels.push_back(ds.labels[i]);
        const auto img = ds.image(i);
        out.images.insert(out.images.end(), img.begin(), img.end());
    }
    return out;
}

}  // namespace fus
