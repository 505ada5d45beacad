#include "fus/model_io.hpp"

#include <cstdint>
#include <fstream>

#include "fus/error.hpp"

namespace fus {

namespace {

constexpr uint32_t kMagic = 0x4655534dU;  // "FUSM"
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw DataError(path + ": truncated model file");
    }
    return v;
}

}  // namespace

void save_model(Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    write_u32(out, kMagic);
    write_u32(out, kVersion);
    const std::string& arch = model.arch();
    write_u32(out, static_cast<uint32_t>(arch.size()));
    out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
    const Dims dims = model.input_dims();
    write_u32(out, static_cast<uint32_t>(dims.c));
    write_u32(out, static_cast<uint32_t>(dims.h));
    write_u32(out, static_cast<uint32_t>(dims.w));
    write_u32(out, static_cast<uint32_t>(model.num_classes()));
    const auto blocks = model.params();
    write_u32(out, static_cast<uint32_t>(blocks.size()));
    for (const auto* block : blocks) {
        write_u32(out, static_cast<uint32_t>(block->value.size()));
        out.write(reinterpret_cast<const char*>(block->value.data()),
                  static_cast<std::streamsize>(block->value.size() * sizeof(float)));
    }
    if (!out) throw DataError("write failed: " + path);
}

std::unique_ptr<Model> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path);
    if (read_u32(in, path) != kMagic) throw DataError(path + ": not a model file (bad magic)");
    const uint32_t version = read_u32(in, path);
    if (version != kVersion) {
        throw DataError(path + ": unsupported model version " + std::to_string(version));
    }
    const uint32_t arch_len = read_u32(in, path);
    std::string arch(arch_len, '\0');
    if (!in.read(arch.data(), arch_len)) throw DataError(path + ": truncated arch id");
    Dims dims;
    dims.c = static_cast<int>(read_u32(in, path));
    dims.h = static_cast<int>(read_u32(in, path));
    dims.w = static_cast<int>(read_u32(in, path));
    const int num_classes = static_cast<int>(read_u32(in, path));

    auto model = make_model<float>(arch, dims, num_classes, /*seed=*/0);
    const auto blocks = model->params();
    const uint32_t n_blocks = read_u32(in, path);
    if (n_blocks != blocks.size()) {
        throw DataError(path + ": block count mismatch (file " + std::to_string(n_blocks) +
                        ", arch " + std::to_string(blocks.size()) + ")");
    }
    for (auto* block : blocks) {
        const uint32_t n = read_u32(in, path);
        if (n != block->value.size()) {
            throw DataError(path + ": parameter block size mismatch");
        }
        if (!in.read(reinterpret_cast<char*>(block->value.data()),
                     static_cast<std::streamsize>(n * sizeof(float)))) {
            throw DataError(path + ": truncated parameter block");
        }
    }
    return model;
}

}  // namespace fus
