#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fus/layers.hpp"
#include "fus/tensor.hpp"

namespace fus {

/// Feed-forward classifier: an ordered layer list ending in K logits, with a
/// softmax cross-entropy head applied by loss_and_backward(). Owns its
/// parameters; one model is owned by one training run.
template <class T>
class BasicModel {
public:
    BasicModel(Dims input, int num_classes, std::string arch)
        : input_(input), num_classes_(num_classes), arch_(std::move(arch)) {
        if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
    }

    void add(std::unique_ptr<Layer<T>> layer) {
        const Dims expect = layers_.empty() ? input_ : layers_.back()->out_dims();
        if (!(layer->in_dims() == expect)) {
            throw ConfigError(std::string("layer ") + layer->kind() + " expects input " +
                              layer->in_dims().str() + " but pipeline provides " + expect.str());
        }
        layers_.push_back(std::move(layer));
    }

    /// Must hold before training: final stage produces (K,1,1).
    void check_head() const {
        const Dims out = layers_.empty() ? input_ : layers_.back()->out_dims();
        if (!(out == Dims{num_classes_, 1, 1})) {
            throw ConfigError("model output dims " + out.str() + " do not match " +
                              std::to_string(num_classes_) + " classes");
        }
    }

    Dims input_dims() const { return input_; }
    int num_classes() const { return num_classes_; }
    const std::string& arch() const { return arch_; }
    size_t num_layers() const { return layers_.size(); }
    const Layer<T>& layer(size_t i) const { return *layers_.at(i); }

    std::vector<ParamBlock<T>*> params() {
        std::vector<ParamBlock<T>*> out;
        for (auto& l : layers_) {
            for (auto* p : l->params()) out.push_back(p);
        }
        return out;
    }

    void zero_grads() {
        for (auto* p : params()) p->zero_grad();
    }

    /// Raw forward pass over a flat NCHW batch buffer; returns the logits
    /// buffer (batch x K).
    const std::vector<T>& forward_raw(const std::vector<T>& batch_data, int batch) {
        if (batch <= 0 || batch_data.size() != static_cast<size_t>(batch) * input_.numel()) {
            throw ConfigError("forward: batch buffer does not match input dims " + input_.str());
        }
        bufs_.resize(layers_.size() + 1);
        bufs_[0] = batch_data;
        for (size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(bufs_[i], bufs_[i + 1], batch);
        }
        return bufs_.back();
    }

    /// Tensor-boundary forward: input shape (batch, C, H, W) or (batch, D),
    /// output shape (batch, K).
    BasicTensor<T> forward(const BasicTensor<T>& batch) {
        const int n = batch_extent(batch);
        const auto& logits = forward_raw(batch.data, n);
        BasicTensor<T> out({n, num_classes_}, logits);
        if (!out.all_finite()) throw ConfigError("forward produced non-finite logits");
        return out;
    }

    /// Mean softmax cross-entropy over the batch, plus a full backward pass
    /// accumulating parameter gradients. Call zero_grads() first.
    double loss_and_backward(const std::vector<T>& batch_data, const std::vector<int>& labels,
                             int batch) {
        const auto& logits = forward_raw(batch_data, batch);
        if (labels.size() != static_cast<size_t>(batch)) {
            throw ConfigError("loss: labels/batch size mismatch");
        }
        std::vector<T> dlogits(logits.size());
        const double loss = softmax_ce(logits, labels, batch, dlogits);
        backward_raw(dlogits, batch);
        return loss;
    }

    /// Mean softmax cross-entropy only (no backward).
    double loss(const std::vector<T>& batch_data, const std::vector<int>& labels, int batch) {
        const auto& logits = forward_raw(batch_data, batch);
        std::vector<T> unused;
        return softmax_ce(logits, labels, batch, unused, /*want_grad=*/false);
    }

    /// Argmax per row; ties resolved to the lowest class index.
    std::vector<int> predict_labels(const BasicTensor<T>& inputs) {
        const int n = batch_extent(inputs);
        const auto& logits = forward_raw(inputs.data, n);
        return argmax_rows(logits, n);
    }

    std::vector<int> argmax_rows(const std::vector<T>& logits, int batch) const {
        std::vector<int> out(static_cast<size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            const T* row = logits.data() + static_cast<size_t>(b) * num_classes_;
            int best = 0;
            for (int k = 1; k < num_classes_; ++k) {
                if (row[k] > row[best]) best = k;
            }
            out[b] = best;
        }
        return out;
    }

private:
    int batch_extent(const BasicTensor<T>& t) const {
        if (t.shape.empty()) throw ConfigError("forward: empty tensor");
        const int n = t.shape[0];
        size_t per = 1;
        for (size_t i = 1; i < t.shape.size(); ++i) per *= static_cast<size_t>(t.shape[i]);
        if (per != input_.numel()) {
            throw ConfigError("forward: per-sample size " + std::to_string(per) +
                              " does not match model input " + input_.str());
        }
        return n;
    }

    double softmax_ce(const std::vector<T>& logits, const std::vector<int>& labels, int batch,
                      std::vector<T>& dlogits, bool want_grad = true) {
        const int K = num_classes_;
        if (want_grad) dlogits.assign(logits.size(), T{0});
        double total = 0.0;
        for (int b = 0; b < batch; ++b) {
            const int t = labels[static_cast<size_t>(b)];
            if (t < 0 || t >= K) throw ConfigError("label " + std::to_string(t) + " out of range");
            const T* row = logits.data() + static_cast<size_t>(b) * K;
            double mx = static_cast<double>(row[0]);
            for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
            double sum = 0.0;
            for (int k = 0; k < K; ++k) sum += std::exp(static_cast<double>(row[k]) - mx);
            total += std::log(sum) - (static_cast<double>(row[t]) - mx);
            if (want_grad) {
                T* drow = dlogits.data() + static_cast<size_t>(b) * K;
                for (int k = 0; k < K; ++k) {
                    const double p = std::exp(static_cast<double>(row[k]) - mx) / sum;
                    drow[k] = static_cast<T>((p - (k == t ? 1.0 : 0.0)) / batch);
                }
            }
        }
        return total / batch;
    }

    void backward_raw(const std::vector<T>& dlogits, int batch) {
        std::vector<T> grad = dlogits;
        std::vector<T> grad_prev;
        for (size_t i = layers_.size(); i-- > 0;) {
            layers_[i]->backward(grad, grad_prev, batch);
            std::swap(grad, grad_prev);
        }
    }

    Dims input_;
    int num_classes_;
    std::string arch_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<std::vector<T>> bufs_;
};

using Model = BasicModel<float>;

/// Architecture registry. Keyed by identifier so experiment grids can vary
/// the victim network by name.
template <class T>
std::unique_ptr<BasicModel<T>> make_model(const std::string& arch, Dims input, int num_classes,
                                          uint64_t seed) {
    Rng rng(derive_seed(seed, "init/" + arch));
    auto model = std::make_unique<BasicModel<T>>(input, num_classes, arch);
    auto dims = [&]() { return model->num_layers() == 0 ? input : model->layer(model->num_layers() - 1).out_dims(); };

    if (arch == "mlp") {
        // flatten -> 64 -> 32 -> K
        model->add(std::make_unique<FlattenLayer<T>>(dims()));
        model->add(std::make_unique<AffineLayer<T>>(dims(), 64, rng));
        model->add(std::make_unique<ReluLayer<T>>(dims()));
        model->add(std::make_unique<AffineLayer<T>>(dims(), 32, rng));
        model->add(std::make_unique<ReluLayer<T>>(dims()));
        model->add(std::make_unique<AffineLayer<T>>(dims(), num_classes, rng));
    } else if (arch == "small-cnn" || arch == "small-cnn-wide") {
        const int f1 = arch == "small-cnn" ? 8 : 16;
        const int f2 = f1 * 2;
        const int hidden = arch == "small-cnn" ? 64 : 96;
        model->add(std::make_unique<Conv2dLayer<T>>(dims(), f1, 3, rng));
        model->add(std::make_unique<ReluLayer<T>>(dims()));
        model->add(std::make_unique<MaxPool2dLayer<T>>(dims()));
        model->add(std::make_unique<Conv2dLayer<T>>(dims(), f2, 3, rng));
        model->add(std::make_unique<ReluLayer<T>>(dims()));
        model->add(std::make_unique<MaxPool2dLayer<T>>(dims()));
        model->add(std::make_unique<FlattenLayer<T>>(dims()));
        model->add(std::make_unique<AffineLayer<T>>(dims(), hidden, rng));
        model->add(std::make_unique<ReluLayer<T>>(dims()));
        model->add(std::make_unique<AffineLayer<T>>(dims(), num_classes, rng));
    } else {
        throw ConfigError("unknown architecture id: " + arch);
    }
    model->check_head();
    return model;
}

inline const std::vector<std::string>& known_architectures() {
    static const std::vector<std::string> archs = {"mlp", "small-cnn", "small-cnn-wide"};
    return archs;
}

}  // namespace fus
