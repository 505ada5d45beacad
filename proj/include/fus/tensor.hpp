#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "fus/error.hpp"

namespace fus {

/// Dense row-major tensor. The training core works on raw buffers internally;
/// this is the boundary type for inputs, logits and parameters.
template <class T>
struct BasicTensor {
    std::vector<int> shape;
    std::vector<T> data;

    BasicTensor() = default;
    BasicTensor(std::vector<int> shape_, std::vector<T> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        check_shape();
    }

    static BasicTensor zeros(std::vector<int> shape_) {
        size_t n = 1;
        for (int e : shape_) n *= static_cast<size_t>(e);
        return BasicTensor(std::move(shape_), std::vector<T>(n, T{0}));
    }

    size_t numel() const { return data.size(); }

    int extent(size_t axis) const { return shape.at(axis); }

    void check_shape() const {
        size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw ConfigError("tensor extent must be positive");
            n *= static_cast<size_t>(e);
        }
        if (n != data.size()) {
            throw ConfigError("tensor shape/data mismatch: shape product " + std::to_string(n) +
                              " vs data size " + std::to_string(data.size()));
        }
    }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

using Tensor = BasicTensor<float>;

}  // namespace fus
