#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "stcids/train.hpp"

using namespace stcids;
using namespace stcids::train;
using models::ModelConfig;
using models::ModelKind;
using neural::Param;
using neural::Ten;

namespace {

Param<float> scalar_param(float v) {
    Param<float> p;
    p.name = "p";
    p.init_shape({1});
    p.value.at(0) = v;
    return p;
}

// Separable single-frame toy data: intrusion rows carry large first features.
dataset::Dataset toy_dataset(size_t n, uint64_t seed) {
    dataset::Dataset ds;
    ds.kind = ModelKind::SingleFrame;
    ds.count = n;
    ds.x.resize(n * 19);
    ds.y.resize(n);
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < n; ++i) {
        int label = static_cast<int>(draw_index(rng, 2));
        ds.y[i] = label;
        for (int f = 0; f < 19; ++f) {
            double base = label ? 0.85 : 0.15;
            ds.x[i * 19 + f] = static_cast<float>(base + draw_uniform(rng, -0.1, 0.1));
        }
    }
    return ds;
}

ModelConfig tiny_config(ModelKind kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.conv_filters = {4, 4, 8};
    cfg.lstm_hidden = 6;
    cfg.dense_width = 8;
    cfg.dropout_rate = 0.0;
    cfg.attention_reduction = 4;
    return cfg;
}

Hyperparameters fast_hp(uint64_t seed) {
    Hyperparameters hp;
    hp.learning_rate = 1e-2;
    hp.optimizer = OptimizerKind::Adam;
    hp.dropout_rate = 0.0;
    hp.conv_filters = {4, 4, 8};
    hp.dense_width = 8;
    hp.lstm_hidden = 6;
    hp.batch_size = 16;
    hp.max_epochs = 20;
    hp.seed = seed;
    return hp;
}

}  // namespace

TEST_CASE("sgd hand arithmetic") {
    auto p = scalar_param(1.0f);
    p.grad.at(0) = 0.5f;
    Optimizer<float> opt(OptimizerKind::SGD, 0.1);
    std::vector<Param<float>*> params{&p};
    opt.step(params);
    CHECK(p.value.at(0) == doctest::Approx(0.95f));
}

TEST_CASE("adam first step has magnitude ~ lr regardless of gradient size") {
    for (double g : {1e-4, 1.0, 1e4}) {
        auto p = scalar_param(0.0f);
        p.grad.at(0) = static_cast<float>(g);
        Optimizer<float> opt(OptimizerKind::Adam, 0.01);
        std::vector<Param<float>*> params{&p};
        opt.step(params);
        CHECK(std::abs(p.value.at(0)) == doctest::Approx(0.01).epsilon(1e-3));
        CHECK(p.value.at(0) < 0.0f);  // descends
    }
}

TEST_CASE("zero gradient leaves parameters unchanged for all optimizers") {
    for (auto kind : {OptimizerKind::SGD, OptimizerKind::Adam, OptimizerKind::RMSprop}) {
        auto p = scalar_param(2.5f);
        Optimizer<float> opt(kind, 0.1);
        std::vector<Param<float>*> params{&p};
        opt.step(params);
        opt.step(params);
        CHECK(p.value.at(0) == 2.5f);
    }
}

TEST_CASE("rmsprop step uses the running second moment") {
    auto p = scalar_param(1.0f);
    p.grad.at(0) = 2.0f;
    Optimizer<float> opt(OptimizerKind::RMSprop, 0.1);
    std::vector<Param<float>*> params{&p};
    opt.step(params);
    // v = 0.1 * 4 = 0.4 ; step = 0.1 * 2 / (sqrt(0.4) + 1e-8)
    CHECK(p.value.at(0) == doctest::Approx(1.0 - 0.1 * 2.0 / std::sqrt(0.4)).epsilon(1e-5));
}

TEST_CASE("gradient clipping caps the global norm") {
    auto a = scalar_param(0.0f);
    auto b = scalar_param(0.0f);
    a.grad.at(0) = 30.0f;
    b.grad.at(0) = 40.0f;  // norm 50
    std::vector<Param<float>*> params{&a, &b};
    clip_global_norm(params, 5.0);
    CHECK(a.grad.at(0) == doctest::Approx(3.0f));
    CHECK(b.grad.at(0) == doctest::Approx(4.0f));
    clip_global_norm(params, 5.0);  // already within bounds: untouched
    CHECK(a.grad.at(0) == doctest::Approx(3.0f));
}

TEST_CASE("fit reaches perfect accuracy on separable toy data") {
    auto data = toy_dataset(200, 1);
    auto val = toy_dataset(60, 2);
    models::Model<float> m(tiny_config(ModelKind::SingleFrame), 3);
    auto hist = fit(m, data, val, fast_hp(4));
    CHECK(hist.epochs() <= 20);
    CHECK(hist.val_acc[static_cast<size_t>(hist.best_epoch - 1)] == doctest::Approx(1.0));
}

TEST_CASE("lr = 0 leaves the loss history flat with dropout 0") {
    auto data = toy_dataset(64, 5);
    auto val = toy_dataset(32, 6);
    models::Model<float> m(tiny_config(ModelKind::SingleFrame), 7);
    Hyperparameters hp = fast_hp(8);
    hp.learning_rate = 0.0;
    hp.optimizer = OptimizerKind::SGD;
    hp.max_epochs = 5;
    hp.patience = 100;
    hp.batch_size = 64;  // full batch: batch statistics identical every epoch
    auto hist = fit(m, data, val, hp);
    REQUIRE(hist.epochs() == 5);
    for (size_t e = 1; e < hist.epochs(); ++e)
        CHECK(hist.train_loss[e] == doctest::Approx(hist.train_loss[0]).epsilon(1e-6));
}

TEST_CASE("memorization: 32 examples reach train loss < 0.01 within 500 epochs") {
    auto data = toy_dataset(32, 9);
    models::Model<float> m(tiny_config(ModelKind::SingleFrame), 10);
    Hyperparameters hp = fast_hp(11);
    hp.max_epochs = 500;
    hp.patience = 500;  // no early exit: watch the train loss itself
    hp.batch_size = 32;
    auto hist = fit(m, data, data, hp);
    double best = 1e9;
    for (double l : hist.train_loss) best = std::min(best, l);
    CHECK(best < 0.01);
}

TEST_CASE("determinism: identical data, hp, seed give identical histories") {
    auto data = toy_dataset(120, 12);
    auto val = toy_dataset(40, 13);
    Hyperparameters hp = fast_hp(14);
    hp.max_epochs = 6;
    hp.dropout_rate = 0.3;

    models::ModelConfig cfg = tiny_config(ModelKind::SingleFrame);
    cfg.dropout_rate = 0.3;
    models::Model<float> m1(cfg, 15);
    models::Model<float> m2(cfg, 15);
    auto h1 = fit(m1, data, val, hp);
    auto h2 = fit(m2, data, val, hp);
    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.val_loss == h2.val_loss);
    CHECK(h1.val_acc == h2.val_acc);
    CHECK(h1.to_csv() == h2.to_csv());
}

TEST_CASE("early stopping restores the best-validation weights") {
    auto data = toy_dataset(150, 16);
    auto val = toy_dataset(50, 17);
    models::Model<float> m(tiny_config(ModelKind::SingleFrame), 18);
    Hyperparameters hp = fast_hp(19);
    hp.max_epochs = 40;
    hp.patience = 6;
    auto hist = fit(m, data, val, hp);

    // the returned model's validation loss equals the best epoch's
    std::vector<size_t> idx(val.count);
    std::iota(idx.begin(), idx.end(), 0);
    auto probs = predict_probs(m, val, idx);
    double l = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double p = std::clamp(probs[i], 1e-7, 1.0 - 1e-7);
        l -= val.y[i] ? std::log(p) : std::log(1.0 - p);
    }
    l /= static_cast<double>(probs.size());
    double best = *std::min_element(hist.val_loss.begin(), hist.val_loss.end());
    CHECK(l == doctest::Approx(best).epsilon(1e-5));
    for (double vl : hist.val_loss) CHECK(l <= vl + 1e-9);
}

TEST_CASE("diverged fit throws with history attached") {
    auto data = toy_dataset(64, 20);
    models::Model<float> m(tiny_config(ModelKind::SingleFrame), 21);
    Hyperparameters hp = fast_hp(22);
    hp.learning_rate = 1e10;  // guaranteed blow-up
    hp.optimizer = OptimizerKind::SGD;
    hp.clip_norm = 1e30;
    hp.max_epochs = 10;
    CHECK_THROWS_AS(fit(m, data, data, hp), Diverged);
}

TEST_CASE("history csv format") {
    TrainHistory h;
    h.train_loss = {0.5, 0.25};
    h.val_loss = {0.6, 0.3};
    h.val_acc = {0.7, 0.9};
    auto csv = h.to_csv();
    CHECK(csv == "epoch,train_loss,val_loss,val_acc\n1,0.5,0.6,0.7\n2,0.25,0.3,0.9\n");
}
