#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fus/error.hpp"
#include "fus/rng.hpp"

namespace fus {

/// Per-sample feature dimensions, channel-major. Fully-connected data is
/// carried as (features, 1, 1).
struct Dims {
    int c = 0;
    int h = 0;
    int w = 0;

    size_t numel() const { return static_cast<size_t>(c) * h * w; }
    bool operator==(const Dims&) const = default;
    std::string str() const {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

template <class T>
struct ParamBlock {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;

    void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

/// One stage of the network. forward() caches whatever backward() needs, so a
/// backward() call must always follow a forward() with the same batch.
template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    virtual Dims in_dims() const = 0;
    virtual Dims out_dims() const = 0;
    virtual void forward(const std::vector<T>& in, std::vector<T>& out, int batch) = 0;
    virtual void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int batch) = 0;
    virtual std::vector<ParamBlock<T>*> params() { return {}; }
};

namespace detail {

/// Kaiming-uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <class T>
void kaiming_uniform(std::vector<T>& w, size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (T& v : w) v = static_cast<T>((rng.uniform() * 2.0 - 1.0) * limit);
}

}  // namespace detail

template <class T>
class AffineLayer final : public Layer<T> {
public:
    AffineLayer(Dims in, int out_features, Rng& rng) : in_(in), out_{out_features, 1, 1} {
        if (out_features <= 0) throw ConfigError("affine: out_features must be positive");
        const size_t d = in_.numel();
        weight_.name = "affine.weight";
        weight_.value.resize(static_cast<size_t>(out_features) * d);
        weight_.grad.assign(weight_.value.size(), T{0});
        detail::kaiming_uniform(weight_.value, d, rng);
        bias_.name = "affine.bias";
        bias_.value.assign(static_cast<size_t>(out_features), T{0});
        bias_.grad.assign(bias_.value.size(), T{0});
    }

    const char* kind() const override { return "affine"; }
    Dims in_dims() const override { return in_; }
    Dims out_dims() const override { return out_; }

    void forward(const std::vector<T>& in, std::vector<T>& out, int batch) override {
        const size_t d = in_.numel();
        const size_t m = static_cast<size_t>(out_.c);
        in_cache_ = in;
        out.assign(static_cast<size_t>(batch) * m, T{0});
        for (int b = 0; b < batch; ++b) {
            const T* x = in.data() + static_cast<size_t>(b) * d;
            T* y = out.data() + static_cast<size_t>(b) * m;
            for (size_t i = 0; i < m; ++i) {
                const T* wrow = weight_.value.data() + i * d;
                T acc = bias_.value[i];
                for (size_t j = 0; j < d; ++j) acc += wrow[j] * x[j];
                y[i] = acc;
            }
        }
    }

    void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int batch) override {
        const size_t d = in_.numel();
        const size_t m = static_cast<size_t>(out_.c);
        grad_in.assign(static_cast<size_t>(batch) * d, T{0});
        for (int b = 0; b < batch; ++b) {
            const T* x = in_cache_.data() + static_cast<size_t>(b) * d;
            const T* gy = grad_out.data() + static_cast<size_t>(b) * m;
            T* gx = grad_in.data() + static_cast<size_t>(b) * d;
            for (size_t i = 0; i < m; ++i) {
                const T g = gy[i];
                const T* wrow = weight_.value.data() + i * d;
                T* gwrow = weight_.grad.data() + i * d;
                bias_.grad[i] += g;
                for (size_t j = 0; j < d; ++j) {
                    gx[j] += g * wrow[j];
                    gwrow[j] += g * x[j];
                }
            }
        }
    }

    std::vector<ParamBlock<T>*> params() override { return {&weight_, &bias_}; }

private:
    Dims in_, out_;
    ParamBlock<T> weight_, bias_;
    std::vector<T> in_cache_;
};

/// 2-D convolution, stride 1, odd square kernel, same padding.
template <class T>
class Conv2dLayer final : public Layer<T> {
public:
    Conv2dLayer(Dims in, int out_channels, int kernel, Rng& rng)
        : in_(in), out_{out_channels, in.h, in.w}, k_(kernel) {
        if (out_channels <= 0) throw ConfigError("conv2d: out_channels must be positive");
        if (kernel <= 0 || kernel % 2 == 0) throw ConfigError("conv2d: kernel must be odd");
        const size_t fan_in = static_cast<size_t>(in_.c) * k_ * k_;
        weight_.name = "conv.weight";
        weight_.value.resize(static_cast<size_t>(out_channels) * fan_in);
        weight_.grad.assign(weight_.value.size(), T{0});
        detail::kaiming_uniform(weight_.value, fan_in, rng);
        bias_.name = "conv.bias";
        bias_.value.assign(static_cast<size_t>(out_channels), T{0});
        bias_.grad.assign(bias_.value.size(), T{0});
    }

    const char* kind() const override { return "conv2d"; }
    Dims in_dims() const override { return in_; }
    Dims out_dims() const override { return out_; }

    void forward(const std::vector<T>& in, std::vector<T>& out, int batch) override {
        in_cache_ = in;
        const int H = in_.h, W = in_.w, P = k_ / 2;
        const size_t plane = static_cast<size_t>(H) * W;
        const size_t in_sample = in_.numel(), out_sample = out_.numel();
        out.resize(static_cast<size_t>(batch) * out_sample);
        for (int b = 0; b < batch; ++b) {
            const T* x = in.data() + static_cast<size_t>(b) * in_sample;
            T* y = out.data() + static_cast<size_t>(b) * out_sample;
            for (int co = 0; co < out_.c; ++co) {
                T* yp = y + static_cast<size_t>(co) * plane;
                std::fill(yp, yp + plane, bias_.value[co]);
                for (int ci = 0; ci < in_.c; ++ci) {
                    const T* xp = x + static_cast<size_t>(ci) * plane;
                    const T* wk = weight_.value.data() +
                                  ((static_cast<size_t>(co) * in_.c + ci) * k_) * k_;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int dy = ky - P;
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        for (int kx = 0; kx < k_; ++kx) {
                            const int dx = kx - P;
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            const T wv = wk[ky * k_ + kx];
                            for (int yy = y0; yy < y1; ++yy) {
                                T* orow = yp + static_cast<size_t>(yy) * W;
                                const T* irow = xp + static_cast<size_t>(yy + dy) * W + dx;
                                for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
                            }
                        }
                    }
                }
            }
        }
    }

    void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int batch) override {
        const int H = in_.h, W = in_.w, P = k_ / 2;
        const size_t plane = static_cast<size_t>(H) * W;
        const size_t in_sample = in_.numel(), out_sample = out_.numel();
        grad_in.assign(static_cast<size_t>(batch) * in_sample, T{0});
        for (int b = 0; b < batch; ++b) {
            const T* x = in_cache_.data() + static_cast<size_t>(b) * in_sample;
            const T* gy = grad_out.data() + static_cast<size_t>(b) * out_sample;
            T* gx = grad_in.data() + static_cast<size_t>(b) * in_sample;
            for (int co = 0; co < out_.c; ++co) {
                const T* gyp = gy + static_cast<size_t>(co) * plane;
                T bacc = T{0};
                for (size_t i = 0; i < plane; ++i) bacc += gyp[i];
                bias_.grad[co] += bacc;
                for (int ci = 0; ci < in_.c; ++ci) {
                    const T* xp = x + static_cast<size_t>(ci) * plane;
                    T* gxp = gx + static_cast<size_t>(ci) * plane;
                    const size_t wbase = ((static_cast<size_t>(co) * in_.c + ci) * k_) * k_;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int dy = ky - P;
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        for (int kx = 0; kx < k_; ++kx) {
                            const int dx = kx - P;
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            const T wv = weight_.value[wbase + ky * k_ + kx];
                            T wacc = T{0};
                            for (int yy = y0; yy < y1; ++yy) {
                                const T* grow = gyp + static_cast<size_t>(yy) * W;
                                const T* irow = xp + static_cast<size_t>(yy + dy) * W + dx;
                                T* gxrow = gxp + static_cast<size_t>(yy + dy) * W + dx;
                                for (int xx = x0; xx < x1; ++xx) {
                                    wacc += grow[xx] * irow[xx];
                                    gxrow[xx] += wv * grow[xx];
                                }
                            }
                            weight_.grad[wbase + ky * k_ + kx] += wacc;
                        }
                    }
                }
            }
        }
    }

    std::vector<ParamBlock<T>*> params() override { return {&weight_, &bias_}; }

private:
    Dims in_, out_;
    int k_;
    ParamBlock<T> weight_, bias_;
    std::vector<T> in_cache_;
};

/// 2x2 max pooling, stride 2. Input height and width must be even.
template <class T>
class MaxPool2dLayer final : public Layer<T> {
public:
    explicit MaxPool2dLayer(Dims in) : in_(in), out_{in.c, in.h / 2, in.w / 2} {
        if (in.h % 2 != 0 || in.w % 2 != 0) {
            throw ConfigError("maxpool2d: input dims " + in.str() + " not divisible by 2");
        }
    }

    const char* kind() const override { return "maxpool2d"; }
    Dims in_dims() const override { return in_; }
    Dims out_dims() const override { return out_; }

    void forward(const std::vector<T>& in, std::vector<T>& out, int batch) override {
        const size_t in_sample = in_.numel(), out_sample = out_.numel();
        out.resize(static_cast<size_t>(batch) * out_sample);
        argmax_.resize(out.size());
        const int H = in_.h, W = in_.w, OW = out_.w;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < in_.c; ++c) {
                const T* xp = in.data() + static_cast<size_t>(b) * in_sample +
                              static_cast<size_t>(c) * H * W;
                const size_t obase = static_cast<size_t>(b) * out_sample +
                                     static_cast<size_t>(c) * out_.h * OW;
                for (int oy = 0; oy < out_.h; ++oy) {
                    for (int ox = 0; ox < OW; ++ox) {
                        const int iy = oy * 2, ix = ox * 2;
                        T best = xp[iy * W + ix];
                        uint8_t arg = 0;
                        // fixed window scan order fixes tie-breaking
                        const T cand1 = xp[iy * W + ix + 1];
                        if (cand1 > best) { best = cand1; arg = 1; }
                        const T cand2 = xp[(iy + 1) * W + ix];
                        if (cand2 > best) { best = cand2; arg = 2; }
                        const T cand3 = xp[(iy + 1) * W + ix + 1];
                        if (cand3 > best) { best = cand3; arg = 3; }
                        out[obase + oy * OW + ox] = best;
                        argmax_[obase + oy * OW + ox] = arg;
                    }
                }
            }
        }
    }

    void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int batch) override {
        const size_t in_sample = in_.numel(), out_sample = out_.numel();
        grad_in.assign(static_cast<size_t>(batch) * in_sample, T{0});
        const int H = in_.h, W = in_.w, OW = out_.w;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < in_.c; ++c) {
                T* gxp = grad_in.data() + static_cast<size_t>(b) * in_sample +
                         static_cast<size_t>(c) * H * W;
                const size_t obase = static_cast<size_t>(b) * out_sample +
                                     static_cast<size_t>(c) * out_.h * OW;
                for (int oy = 0; oy < out_.h; ++oy) {
                    for (int ox = 0; ox < OW; ++ox) {
                        const size_t o = obase + oy * OW + ox;
                        const uint8_t arg = argmax_[o];
                        const int iy = oy * 2 + (arg >> 1), ix = ox * 2 + (arg & 1);
                        gxp[iy * W + ix] += grad_out[o];
                    }
                }
            }
        }
    }

private:
    Dims in_, out_;
    std::vector<uint8_t> argmax_;
};

template <class T>
class ReluLayer final : public Layer<T> {
public:
    explicit ReluLayer(Dims in) : in_(in) {}

    const char* kind() const override { return "relu"; }
    Dims in_dims() const override { return in_; }
    Dims out_dims() const override { return in_; }

    void forward(const std::vector<T>& in, std::vector<T>& out, int batch) override {
        const size_t n = static_cast<size_t>(batch) * in_.numel();
        out.resize(n);
        mask_.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const bool pos = in[i] > T{0};
            mask_[i] = pos ? 1 : 0;
            out[i] = pos ? in[i] : T{0};
        }
    }

    void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int batch) override {
        const size_t n = static_cast<size_t>(batch) * in_.numel();
        grad_in.resize(n);
        for (size_t i = 0; i < n; ++i) grad_in[i] = mask_[i] ? grad_out[i] : T{0};
    }

private:
    Dims in_;
    std::vector<uint8_t> mask_;
};

/// Reshape (c,h,w) -> (c*h*w,1,1). Row-major layout makes the data copy an
/// identity; kept as an explicit stage so architectures read naturally.
template <class T>
class FlattenLayer final : public Layer<T> {
public:
    explicit FlattenLayer(Dims in) : in_(in), out_{static_cast<int>(in.numel()), 1, 1} {}

    const char* kind() const override { return "flatten"; }
    Dims in_dims() const override { return in_; }
    Dims out_dims() const override { return out_; }

    void forward(const std::vector<T>& in, std::vector<T>& out, int) override { out = in; }
    void backward(const std::vector<T>& grad_out, std::vector<T>& grad_in, int) override {
        grad_in = grad_out;
    }

private:
    Dims in_, out_;
};

}  // namespace fus
