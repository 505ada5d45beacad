#include <doctest.h>

#include <cmath>
#include <limits>

#include "fus/dataset.hpp"
#include "fus/model.hpp"
#include "fus/optim.hpp"
#include "fus/poison.hpp"
#include "fus/schedule.hpp"
#include "fus/trainer.hpp"

using namespace fus;

namespace {

// affine-only model with writable parameters
std::unique_ptr<Model> affine_model(int in_features, int classes, uint64_t seed = 1) {
    Rng rng(seed);
    auto m = std::make_unique<Model>(Dims{in_features, 1, 1}, classes, "test-affine");
    m->add(std::make_unique<AffineLayer<float>>(Dims{in_features, 1, 1}, classes, rng));
    m->check_head();
    return m;
}

void set_all(ParamBlock<float>& block, float v) {
    std::fill(block.value.begin(), block.value.end(), v);
}

PoisonPlan dummy_plan(const Dataset& ds) {
    PoisonPlan plan;
    plan.target = 0;
    plan.ratio = 0.5;
    plan.trigger.channels = ds.channels;
    plan.trigger.height = ds.height;
    plan.trigger.width = ds.width;
    plan.trigger.image.assign(ds.image_size(), 0.0f);
    plan.trigger.lambda = 0.0;
    return plan;
}

}  // namespace

TEST_CASE("forward: zero-weight affine model produces all-zero logits") {
    auto model = affine_model(4, 3);
    for (auto* p : model->params()) set_all(*p, 0.0f);
    Tensor batch({2, 4}, {0.1f, -0.5f, 2.0f, 1.0f, 0.0f, 0.3f, -1.0f, 0.7f});
    const Tensor logits = model->forward(batch);
    REQUIRE(logits.shape == std::vector<int>{2, 3});
    for (float v : logits.data) CHECK(v == 0.0f);
}

TEST_CASE("forward: identity-initialized 1x1 affine returns its input") {
    auto model = affine_model(3, 3);
    auto params = model->params();
    set_all(*params[0], 0.0f);
    set_all(*params[1], 0.0f);
    for (int i = 0; i < 3; ++i) params[0]->value[static_cast<size_t>(i) * 3 + i] = 1.0f;
    Tensor v({1, 3}, {0.25f, -1.5f, 3.0f});
    const Tensor logits = model->forward(v);
    CHECK(logits.data == v.data);
}

TEST_CASE("forward: bitwise-identical logits across two calls") {
    auto model = make_model<float>("small-cnn", Dims{1, 8, 8}, 4, 99);
    Rng rng(5);
    std::vector<float> data(2 * 64);
    for (auto& x : data) x = static_cast<float>(rng.uniform());
    Tensor batch({2, 1, 8, 8}, data);
    const Tensor a = model->forward(batch);
    const Tensor b = model->forward(batch);
    CHECK(a.data == b.data);
}

TEST_CASE("forward: shape mismatch is a configuration error") {
    auto model = affine_model(4, 3);
    Tensor bad({1, 5}, std::vector<float>(5, 0.0f));
    CHECK_THROWS_AS(model->forward(bad), ConfigError);
}

TEST_CASE("sgd update: plain gradient step w=1,g=1,lr=0.1 -> 0.9") {
    ParamBlock<float> block;
    block.value = {1.0f};
    block.grad = {1.0f};
    SgdMomentum<float> opt(/*momentum=*/0.0, /*weight_decay=*/0.0);
    opt.step({&block}, 0.1);
    CHECK(block.value[0] == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("sgd update: momentum velocity recurrence over two steps") {
    // v <- 0.9 v + g ; w <- w - 0.1 v with g = 1 from w = 0:
    // step 1: v = 1,   w = -0.1
    // step 2: v = 1.9, w = -0.29
    ParamBlock<float> block;
    block.value = {0.0f};
    block.grad = {1.0f};
    SgdMomentum<float> opt(0.9, 0.0);
    opt.step({&block}, 0.1);
    CHECK(block.value[0] == doctest::Approx(-0.1).epsilon(1e-7));
    block.grad = {1.0f};
    opt.step({&block}, 0.1);
    CHECK(block.value[0] == doctest::Approx(-0.29).epsilon(1e-7));
}

TEST_CASE("sgd update: weight decay folds into the gradient") {
    ParamBlock<float> block;
    block.value = {2.0f};
    block.grad = {0.0f};
    SgdMomentum<float> opt(0.0, 0.5);
    opt.step({&block}, 0.1);
    // v = 0 + 0 + 0.5*2 = 1 ; w = 2 - 0.1
    CHECK(block.value[0] == doctest::Approx(1.9).epsilon(1e-7));
}

TEST_CASE("train_step: lr = 0 leaves parameters unchanged but returns the loss") {
    auto model = affine_model(4, 3, 7);
    std::vector<float> before;
    for (auto* p : model->params()) {
        before.insert(before.end(), p->value.begin(), p->value.end());
    }
    Batch batch;
    batch.images = {0.1f, 0.2f, 0.3f, 0.4f};
    batch.labels = {1};
    batch.size = 1;
    SgdMomentum<float> opt;
    const double loss = train_step(*model, batch, opt, 0.0);
    CHECK(std::isfinite(loss));
    CHECK(loss > 0.0);
    std::vector<float> after;
    for (auto* p : model->params()) {
        after.insert(after.end(), p->value.begin(), p->value.end());
    }
    CHECK(before == after);
}

TEST_CASE("train_step: non-finite loss raises TrainingDiverged with context") {
    auto model = affine_model(2, 2, 3);
    model->params()[0]->value[0] = std::numeric_limits<float>::quiet_NaN();
    Batch batch;
    batch.images = {0.5f, 0.5f};
    batch.labels = {0};
    batch.size = 1;
    SgdMomentum<float> opt;
    try {
        train_step(*model, batch, opt, 0.1, /*epoch=*/4, /*step=*/11);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(e.epoch == 4);
        CHECK(e.step == 11);
    }
}

TEST_CASE("train_step: labels outside [0,K) rejected") {
    auto model = affine_model(2, 2, 3);
    Batch batch;
    batch.images = {0.5f, 0.5f};
    batch.labels = {2};
    batch.size = 1;
    SgdMomentum<float> opt;
    CHECK_THROWS_AS(train_step(*model, batch, opt, 0.1), ConfigError);
}

TEST_CASE("step_lr: schedule values") {
    TrainSchedule s;  // 60 epochs, lr 0.01, drops {30, 50}, factor 10
    CHECK(step_lr(s, 0) == doctest::Approx(0.01));
    CHECK(step_lr(s, 29) == doctest::Approx(0.01));
    CHECK(step_lr(s, 30) == doctest::Approx(0.001));
    CHECK(step_lr(s, 49) == doctest::Approx(0.001));
    CHECK(step_lr(s, 59) == doctest::Approx(0.0001));
    CHECK_THROWS_AS(step_lr(s, 60), ConfigError);
    CHECK_THROWS_AS(step_lr(s, -1), ConfigError);
}

TEST_CASE("schedule validation") {
    TrainSchedule s;
    s.drop_epochs = {50, 30};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.drop_epochs = {30, 70};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.drop_epochs = {};
    s.initial_lr = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("fit: zero epochs returns the initialized model, hook never called") {
    SyntheticSpec spec;
    spec.num_classes = 2;
    spec.per_class = 10;
    spec.channels = 1;
    spec.height = 4;
    spec.width = 4;
    spec.seed = 3;
    auto [train, test] = make_synthetic(spec);
    const PoisonPlan plan = dummy_plan(train);
    auto model = make_model<float>("mlp", Dims{1, 4, 4}, 2, 42);
    std::vector<float> before = model->params()[0]->value;

    MixedStream stream(train, {}, plan, 8);
    TrainSchedule sched;
    sched.epochs = 0;
    sched.drop_epochs = {};
    int hook_calls = 0;
    SgdMomentum<float> opt;
    fit(*model, stream, sched, opt, [&](int, Model&) { ++hook_calls; });
    CHECK(hook_calls == 0);
    CHECK(model->params()[0]->value == before);
}

TEST_CASE("fit: hook fires once per epoch and same seed reproduces the loss") {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.per_class = 20;
    spec.channels = 1;
    spec.height = 4;
    spec.width = 4;
    spec.seed = 11;
    auto [train, test] = make_synthetic(spec);
    const PoisonPlan plan = dummy_plan(train);
    TrainSchedule sched;
    sched.epochs = 5;
    sched.drop_epochs = {3};
    sched.batch_size = 16;
    sched.seed = 77;

    auto run = [&] {
        auto model = make_model<float>("mlp", Dims{1, 4, 4}, 3, 42);
        MixedStream stream(train, {}, plan, sched.batch_size);
        SgdMomentum<float> opt;
        int hook_calls = 0;
        const FitStats stats = fit(*model, stream, sched, opt, [&](int, Model&) { ++hook_calls; });
        CHECK(hook_calls == sched.epochs);
        std::vector<float> params;
        for (auto* p : model->params()) params.insert(params.end(), p->value.begin(), p->value.end());
        return std::make_pair(stats.epoch_loss, params);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);    // losses bit-identical
    CHECK(a.second == b.second);  // parameters bit-identical
    CHECK(a.first.front() > a.first.back());  // it actually learns something
}

TEST_CASE("predict_labels: argmax and tie rules") {
    auto model = affine_model(3, 3);
    auto params = model->params();
    set_all(*params[0], 0.0f);
    set_all(*params[1], 0.0f);
    for (int i = 0; i < 3; ++i) params[0]->value[static_cast<size_t>(i) * 3 + i] = 1.0f;

    // identity model: logits == inputs
    Tensor in({2, 3}, {0.0f, 3.0f, 1.0f, 2.0f, 2.0f, 0.0f});
    const auto labels = model->predict_labels(in);
    CHECK(labels[0] == 1);  // argmax
    CHECK(labels[1] == 0);  // tie -> lowest class index
}

TEST_CASE("predict_labels: zero-weight model predicts class 0 everywhere") {
    auto model = affine_model(4, 3);
    for (auto* p : model->params()) set_all(*p, 0.0f);
    Tensor in({3, 4}, std::vector<float>(12, 0.5f));
    for (int label : model->predict_labels(in)) CHECK(label == 0);
}

TEST_CASE("cross-entropy of uniform logits equals ln K in double precision") {
    for (int k = 2; k <= 10; ++k) {
        Rng rng(static_cast<uint64_t>(k));
        auto model = std::make_unique<BasicModel<double>>(Dims{3, 1, 1}, k, "ce-test");
        model->add(std::make_unique<AffineLayer<double>>(Dims{3, 1, 1}, k, rng));
        for (auto* p : model->params()) std::fill(p->value.begin(), p->value.end(), 0.0);
        const std::vector<double> input = {0.4, 0.1, 0.9};
        const double loss = model->loss(input, {k / 2}, 1);
        CHECK(std::abs(loss - std::log(static_cast<double>(k))) < 1e-12);
    }
}

TEST_CASE("sgd with m=0, wd=0 equals vanilla gradient descent") {
    ParamBlock<float> a, b;
    a.value = b.value = {0.7f, -0.2f};
    a.grad = b.grad = {0.3f, -1.1f};
    SgdMomentum<float> opt(0.0, 0.0);
    opt.step({&a}, 0.05);
    for (size_t i = 0; i < b.value.size(); ++i) b.value[i] -= 0.05f * b.grad[i];
    CHECK(a.value[0] == doctest::Approx(b.value[0]).epsilon(1e-7));
    CHECK(a.value[1] == doctest::Approx(b.value[1]).epsilon(1e-7));
}

TEST_CASE("architecture registry rejects unknown ids and odd pool dims") {
    CHECK_THROWS_AS(make_model<float>("vgg-16", Dims{3, 32, 32}, 10, 1), ConfigError);
    CHECK_THROWS_AS(make_model<float>("small-cnn", Dims{1, 7, 7}, 10, 1), ConfigError);
    for (const auto& arch : known_architectures()) {
        auto m = make_model<float>(arch, Dims{1, 8, 8}, 5, 1);
        CHECK(m->num_classes() == 5);
    }
}

TEST_CASE("adaptive optimizer converges on a quadratic") {
    // minimize (w - 3)^2 from 0
    ParamBlock<float> block;
    block.value = {0.0f};
    block.grad = {0.0f};
    AdaptiveMoments<float> opt(0.9, 0.999, 1e-8, 0.0);
    for (int i = 0; i < 800; ++i) {
        block.grad[0] = 2.0f * (block.value[0] - 3.0f);
        opt.step({&block}, 0.05);
    }
    CHECK(block.value[0] == doctest::Approx(3.0).epsilon(1e-3));
}
