#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stcids/checkpoint.hpp"
#include "stcids/gradcheck.hpp"
#include "stcids/models.hpp"

using namespace stcids;
using namespace stcids::models;
using neural::Ten;
using oracles::fill_uniform;

namespace {

ModelConfig toy_config(ModelKind kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.conv_filters = {4, 8, 8};
    cfg.lstm_hidden = 6;
    cfg.dense_width = 10;
    cfg.dropout_rate = 0.0;
    cfg.attention_reduction = 4;
    return cfg;
}

Ten<float> random_input(ModelKind kind, int n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Ten<float> x;
    if (kind == ModelKind::SingleFrame)
        x.reshape({n, 19});
    else
        x.reshape({n, 64, 19});
    for (auto& v : x.d) v = static_cast<float>(draw_u01(rng));
    return x;
}

}  // namespace

TEST_CASE("config validation") {
    ModelConfig cfg = toy_config(ModelKind::MultiFrame);
    cfg.lstm_blocks = 3;
    CHECK_THROWS_AS(Model<float>(cfg, 1), ConfigInvalid);
    cfg = toy_config(ModelKind::MultiFrame);
    cfg.conv_blocks = 2;
    CHECK_THROWS_AS(Model<float>(cfg, 1), ConfigInvalid);
    cfg = toy_config(ModelKind::MultiFrame);
    cfg.conv_filters[1] = 6;  // not divisible by reduction 4
    CHECK_THROWS_AS(Model<float>(cfg, 1), ConfigInvalid);
    cfg = toy_config(ModelKind::SingleFrame);
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(Model<float>(cfg, 1), ConfigInvalid);
}

TEST_CASE("single-frame model: output is a 2-class distribution") {
    Model<float> m(toy_config(ModelKind::SingleFrame), 5);
    auto x = random_input(ModelKind::SingleFrame, 3, 1);
    auto p = m.predict(x);
    REQUIRE(p.ext[0] == 3);
    REQUIRE(p.ext[1] == 2);
    for (int i = 0; i < 3; ++i) {
        CHECK(p.at(i, 0) >= 0.0f);
        CHECK(p.at(i, 1) >= 0.0f);
        CHECK(p.at(i, 0) + p.at(i, 1) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(m.attention_lengths()[0] == 19);
    CHECK(m.attention_lengths()[1] == 19);
}

TEST_CASE("table-best configurations resolve") {
    Model<float> single(ModelConfig::best_single_frame(), 3);
    auto xs = random_input(ModelKind::SingleFrame, 2, 2);
    CHECK(single.predict(xs).ext[1] == 2);

    Model<float> multi(ModelConfig::best_multi_frame(), 3);
    auto xm = random_input(ModelKind::MultiFrame, 2, 2);
    CHECK(multi.predict(xm).ext[1] == 2);
    CHECK(multi.attention_lengths()[0] == 64);
    CHECK(multi.attention_lengths()[1] == 64);
}

TEST_CASE("inference is deterministic with dropout configured") {
    ModelConfig cfg = toy_config(ModelKind::SingleFrame);
    cfg.dropout_rate = 0.5;
    Model<float> m(cfg, 9);
    auto x = random_input(ModelKind::SingleFrame, 4, 3);
    auto a = m.predict(x);
    auto b = m.predict(x);
    CHECK(a.d == b.d);

    // train-mode forwards differ run to run (fresh dropout masks)
    auto t1 = m.forward(x, true);
    auto t2 = m.forward(x, true);
    bool same = t1.d == t2.d;
    CHECK_FALSE(same);
}

TEST_CASE("batched predict equals per-item predict") {
    Model<float> m(toy_config(ModelKind::MultiFrame), 11);
    auto x = random_input(ModelKind::MultiFrame, 5, 4);
    auto batched = m.predict(x);
    for (int i = 0; i < 5; ++i) {
        Ten<float> one({1, 64, 19});
        std::copy(x.data() + i * 64 * 19, x.data() + (i + 1) * 64 * 19, one.data());
        auto p = m.predict(one);
        CHECK(p.at(0, 0) == doctest::Approx(batched.at(i, 0)).epsilon(1e-6));
        CHECK(p.at(0, 1) == doctest::Approx(batched.at(i, 1)).epsilon(1e-6));
    }
}

TEST_CASE("zero-weight head gives the uniform distribution") {
    Model<float> m(toy_config(ModelKind::SingleFrame), 5);
    auto& head = m.single->head;
    head.W.value.fill(0.0f);
    head.b.value.fill(0.0f);
    auto p = m.predict(random_input(ModelKind::SingleFrame, 3, 6));
    for (int i = 0; i < 3; ++i) {
        CHECK(p.at(i, 0) == doctest::Approx(0.5));
        CHECK(p.at(i, 1) == doctest::Approx(0.5));
    }
}

TEST_CASE("removing the attention block changes multi-frame outputs") {
    ModelConfig cfg = toy_config(ModelKind::MultiFrame);
    Model<float> with(cfg, 21);
    auto x = random_input(ModelKind::MultiFrame, 2, 7);
    auto base = with.predict(x);

    // saturate the gates to 1 so the block becomes a pass-through; if the
    // block were dead this would not move the output
    with.multi->aconv.channel.W1.value.fill(50.0f);
    with.multi->aconv.spatial.conv.K.value.fill(50.0f);
    auto altered = with.predict(x);
    double diff = 0;
    for (size_t i = 0; i < base.size(); ++i)
        diff = std::max(diff, std::abs(static_cast<double>(base.d[i]) - altered.d[i]));
    CHECK(diff > 0.0);
}

TEST_CASE("loss: analytic values") {
    Ten<float> perfect({2, 2});
    perfect.at(0, 0) = 1.0f;  // true label 0
    perfect.at(1, 1) = 1.0f;  // true label 1
    std::vector<neural::Param<float>*> no_params;
    CHECK(loss(perfect, {0, 1}, no_params, 0.0) <= 1e-6);

    Ten<float> half({4, 2});
    half.fill(0.5f);
    CHECK(loss(half, {0, 1, 1, 0}, no_params, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    neural::Param<float> w;
    w.name = "w";
    w.decay = true;
    w.init_shape({1});
    w.value.at(0) = 2.0f;
    std::vector<neural::Param<float>*> params{&w};
    double l = loss(perfect, {0, 1}, params, 0.01);
    CHECK(l == doctest::Approx(0.04).epsilon(1e-4));

    Ten<float> empty({1, 2});
    CHECK_THROWS_AS(loss(empty, {}, no_params, 0.0), LengthMismatch);
}

TEST_CASE("loss is monotone in lambda and nonnegative") {
    std::mt19937_64 rng(50);
    Ten<float> probs({8, 2});
    for (int i = 0; i < 8; ++i) {
        float p = static_cast<float>(draw_uniform(rng, 0.05, 0.95));
        probs.at(i, 0) = 1.0f - p;
        probs.at(i, 1) = p;
    }
    std::vector<int> y{0, 1, 0, 1, 1, 0, 1, 0};
    neural::Param<float> w;
    w.decay = true;
    w.init_shape({4});
    fill_uniform(w.value, rng);
    std::vector<neural::Param<float>*> params{&w};
    double prev = -1.0;
    for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
        double l = loss(probs, y, params, lambda);
        CHECK(l >= 0.0);
        CHECK(l >= prev);
        prev = l;
    }
}

TEST_CASE("ce_dlogits is the softmax-cross-entropy gradient") {
    // finite-difference check of d(loss)/d(logits) through the softmax
    std::mt19937_64 rng(51);
    Ten<double> logits({3, 2});
    fill_uniform(logits, rng);
    std::vector<int> y{1, 0, 1};
    auto loss_of = [&](const Ten<double>& lg) {
        auto p = neural::softmax_rows(lg);
        double acc = 0;
        for (int i = 0; i < 3; ++i) {
            double pi = std::clamp(p.at(i, 1), 1e-12, 1.0 - 1e-12);
            acc -= y[static_cast<size_t>(i)] ? std::log(pi) : std::log(1 - pi);
        }
        return acc / 3.0;
    };
    auto probs = neural::softmax_rows(logits);
    auto d = ce_dlogits(probs, y);
    for (size_t i = 0; i < logits.size(); ++i) {
        double keep = logits.d[i];
        logits.d[i] = keep + 1e-6;
        double lp = loss_of(logits);
        logits.d[i] = keep - 1e-6;
        double lm = loss_of(logits);
        logits.d[i] = keep;
        CHECK(d.d[i] == doctest::Approx((lp - lm) / 2e-6).epsilon(1e-4));
    }
}

namespace {

struct ModelNet {
    Model<double>& m;
    void collect(std::vector<neural::Param<double>*>& out) {
        for (auto* p : m.params()) out.push_back(p);
    }
    Ten<double> forward(const Ten<double>& x, bool train) { return m.forward(x, train); }
    Ten<double> backward(const Ten<double>& dy) { return m.backward(dy); }
};

}  // namespace

TEST_CASE("full-model gradient check at toy widths: single-frame") {
    ModelConfig cfg = toy_config(ModelKind::SingleFrame);
    cfg.conv_filters = {3, 4, 4};
    cfg.lstm_hidden = 4;
    cfg.dense_width = 6;
    Model<double> m(cfg, 33);
    ModelNet net{m};
    std::mt19937_64 rng(52);
    Ten<double> x({2, 19});
    for (auto& v : x.d) v = draw_uniform(rng, 0.1, 0.9);
    CHECK(neural::grad_check(net, x, 1e-4) < 1e-3);
}

TEST_CASE("full-model gradient check at toy widths: multi-frame") {
    ModelConfig cfg = toy_config(ModelKind::MultiFrame);
    cfg.conv_filters = {2, 4, 3};
    cfg.lstm_hidden = 3;
    cfg.dense_width = 5;
    cfg.attention_reduction = 2;
    Model<double> m(cfg, 34);
    ModelNet net{m};
    std::mt19937_64 rng(53);
    Ten<double> x({2, 64, 19});
    for (auto& v : x.d) v = draw_uniform(rng, 0.1, 0.9);
    CHECK(neural::grad_check(net, x, 1e-4) < 1e-3);
}

TEST_CASE("checkpoint round-trip reproduces predictions bit-exactly") {
    ModelConfig cfg = toy_config(ModelKind::MultiFrame);
    Model<float> m(cfg, 55);
    features::MinMaxParams norm;
    for (int i = 0; i < features::kFeatureCount; ++i) {
        norm.x_min[i] = 0.0f;
        norm.x_max[i] = 15.0f;
    }
    checkpoint::Metadata meta;
    meta.seed = 55;
    meta.epochs_trained = 7;

    auto bytes = checkpoint::save_checkpoint(m, norm, meta);
    auto ck = checkpoint::load_checkpoint(bytes);
    CHECK(ck.meta.seed == 55);
    CHECK(ck.meta.epochs_trained == 7);
    CHECK(ck.norm == norm);
    CHECK(ck.config.kind == ModelKind::MultiFrame);

    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_input(ModelKind::MultiFrame, 1, 100 + trial);
        auto a = m.predict(x);
        auto b = ck.model->predict(x);
        CHECK(a.d == b.d);
    }
}

TEST_CASE("checkpoint corruption errors") {
    Model<float> m(toy_config(ModelKind::SingleFrame), 5);
    features::MinMaxParams norm;
    checkpoint::Metadata meta;
    auto bytes = checkpoint::save_checkpoint(m, norm, meta);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(checkpoint::load_checkpoint(bad_magic), checkpoint::BadMagic);

    auto bad_version = bytes;
    bad_version[4] = 0x7F;
    CHECK_THROWS_AS(checkpoint::load_checkpoint(bad_version), checkpoint::VersionMismatch);

    auto truncated = bytes;
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS_AS(checkpoint::load_checkpoint(truncated), checkpoint::TruncatedFile);
}
