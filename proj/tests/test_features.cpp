#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "stcids/features.hpp"

using namespace stcids;
using namespace stcids::features;
using canbus::CanFrame;
using canbus::FrameLabel;

namespace {

CanFrame frame_of(uint16_t id, std::vector<uint8_t> payload, FrameLabel label = FrameLabel::Normal) {
    CanFrame f;
    f.can_id = id;
    f.dlc = static_cast<uint8_t>(payload.size());
    f.payload = std::move(payload);
    f.label = label;
    return f;
}

}  // namespace

TEST_CASE("pad_payload") {
    CHECK(pad_payload({0xA, 0xB, 0xC, 0xD, 0xE, 0xF}) ==
          std::array<uint8_t, 8>{0xA, 0xB, 0xC, 0xD, 0xE, 0xF, 0x00, 0x00});
    std::vector<uint8_t> full{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(pad_payload(full) == std::array<uint8_t, 8>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(pad_payload({}) == std::array<uint8_t, 8>{});
}

TEST_CASE("frame_to_raw_features splits hex digits msb-first") {
    auto row = frame_to_raw_features(
        frame_of(0x316, {0x05, 0x22, 0x6A, 0x0B, 0x21, 0x18, 0x00, 0x7F}));
    RawRow expected{3, 1, 6, 0, 5, 2, 2, 6, 10, 0, 11, 2, 1, 1, 8, 0, 0, 7, 15};
    CHECK(row == expected);

    auto zero = frame_to_raw_features(frame_of(0x000, std::vector<uint8_t>(8, 0)));
    for (auto v : zero) CHECK(v == 0);
}

TEST_CASE("raw features stay in 0..15 over a million random frames") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000000; ++i) {
        CanFrame f;
        f.can_id = static_cast<uint16_t>(draw_index(rng, 0x800));
        f.dlc = static_cast<uint8_t>(draw_index(rng, 9));
        f.payload.resize(f.dlc);
        for (auto& b : f.payload) b = static_cast<uint8_t>(draw_index(rng, 256));
        auto row = frame_to_raw_features(f);
        for (auto v : row) {
            if (v > 15) {
                CHECK(v <= 15);  // report only failures, keep the loop cheap
            }
        }
    }
    CHECK(true);
}

TEST_CASE("injectivity of the digit split on (id, payload)") {
    std::mt19937_64 rng(5);
    std::set<RawRow> seen;
    std::set<std::pair<uint16_t, std::vector<uint8_t>>> inputs;
    for (int i = 0; i < 20000; ++i) {
        CanFrame f;
        f.can_id = static_cast<uint16_t>(draw_index(rng, 0x800));
        f.payload.resize(8);
        for (auto& b : f.payload) b = static_cast<uint8_t>(draw_index(rng, 256));
        f.dlc = 8;
        if (!inputs.emplace(f.can_id, f.payload).second) continue;
        CHECK(seen.insert(frame_to_raw_features(f)).second);
    }
}

TEST_CASE("minmax fit and apply") {
    std::vector<RawRow> rows;
    RawRow lo{}, hi{};
    for (int f = 0; f < kFeatureCount; ++f) {
        lo[f] = 0;
        hi[f] = 15;
    }
    rows.push_back(lo);
    rows.push_back(hi);
    auto params = fit_minmax(rows);

    auto row316 = frame_to_raw_features(
        frame_of(0x316, {0x05, 0x22, 0x6A, 0x0B, 0x21, 0x18, 0x00, 0x7F}));
    auto vals = apply_minmax(row316, params);
    CHECK(vals[0] == doctest::Approx(0.2000).epsilon(1e-4));
    CHECK(vals[1] == doctest::Approx(0.0667).epsilon(1e-2));
    CHECK(vals[2] == doctest::Approx(0.4000).epsilon(1e-4));

    auto zeros = apply_minmax(lo, params);
    auto ones = apply_minmax(hi, params);
    for (int f = 0; f < kFeatureCount; ++f) {
        CHECK(zeros[f] == 0.0f);
        CHECK(ones[f] == 1.0f);
    }

    CHECK_THROWS_AS(fit_minmax({}), EmptySet);
}

TEST_CASE("constant feature maps to zero; out-of-range clamps") {
    std::vector<RawRow> rows(3);
    for (auto& r : rows)
        for (int f = 0; f < kFeatureCount; ++f) r[f] = 7;  // constant everywhere
    rows[1][1] = 2;
    rows[2][1] = 12;  // feature 1 spans [2,12]
    auto params = fit_minmax(rows);

    RawRow probe{};
    for (int f = 0; f < kFeatureCount; ++f) probe[f] = 9;
    probe[1] = 15;  // beyond the fitted max
    auto vals = apply_minmax(probe, params);
    CHECK(vals[0] == 0.0f);  // constant feature convention
    CHECK(vals[1] == 1.0f);  // clamped
    probe[1] = 0;
    CHECK(apply_minmax(probe, params)[1] == 0.0f);
}

TEST_CASE("apply_minmax is monotone and idempotent after clamping") {
    auto norm = [](float v) { return apply_minmax_one(v, 3.0f, 11.0f); };
    float prev = -1.0f;
    for (int v = 0; v <= 15; ++v) {
        float n = norm(static_cast<float>(v));
        CHECK(n >= prev);
        prev = n;
        CHECK(n >= 0.0f);
        CHECK(n <= 1.0f);
    }
}

namespace {

std::vector<FeatureVector> labeled_vectors(size_t n, const std::set<size_t>& injected_at) {
    std::vector<FeatureVector> v(n);
    for (size_t i = 0; i < n; ++i) {
        v[i].values.fill(0.5f);
        v[i].label = injected_at.count(i) ? 1 : 0;
    }
    return v;
}

}  // namespace

TEST_CASE("window_stream counts, labels and stride arithmetic") {
    auto two = window_stream(labeled_vectors(128, {}), 64);
    REQUIRE(two.size() == 2);
    CHECK(two[0].label == 0);
    CHECK(two[1].label == 0);

    auto one = window_stream(labeled_vectors(64, {17}), 64);
    REQUIRE(one.size() == 1);
    CHECK(one[0].label == 1);

    auto three = window_stream(labeled_vectors(200, {}), 64);
    REQUIRE(three.size() == 3);
    CHECK(three[0].start_index == 0);
    CHECK(three[1].start_index == 64);
    CHECK(three[2].start_index == 128);

    CHECK_THROWS_AS(window_stream(labeled_vectors(63, {}), 64), StreamTooShort);
}

TEST_CASE("windows over a purged stream are all normal") {
    auto vecs = labeled_vectors(512, {10, 100, 300});
    std::vector<FeatureVector> purged;
    for (auto& v : vecs)
        if (v.label == 0) purged.push_back(v);
    for (const auto& w : window_stream(purged, 64)) CHECK(w.label == 0);
}

TEST_CASE("stratified kfold: exact divisibility") {
    std::vector<int> labels(100);
    for (size_t i = 50; i < 100; ++i) labels[i] = 1;
    auto splits = stratified_kfold(labels, 10, 3);
    REQUIRE(splits.size() == 10);
    for (const auto& s : splits) {
        CHECK(s.test.size() == 10);
        int pos = 0;
        for (auto i : s.test) pos += labels[i];
        CHECK(pos == 5);
    }
}

TEST_CASE("stratified kfold: 95/5 minority split") {
    std::vector<int> labels(100);
    for (size_t i = 95; i < 100; ++i) labels[i] = 1;
    auto splits = stratified_kfold(labels, 5, 3);
    for (const auto& s : splits) {
        int pos = 0;
        for (auto i : s.test) pos += labels[i];
        CHECK(pos == 1);  // exactly one minority item per fold
    }
}

TEST_CASE("stratified kfold: partition, determinism, class floor") {
    std::vector<int> labels(83);
    for (size_t i = 0; i < 83; i += 3) labels[i] = 1;
    auto splits = stratified_kfold(labels, 10, 77);

    std::set<size_t> all;
    size_t total = 0;
    for (const auto& s : splits) {
        total += s.test.size();
        for (auto i : s.test) CHECK(all.insert(i).second);  // pairwise disjoint
        std::set<size_t> train_set(s.train.begin(), s.train.end());
        for (auto i : s.test) CHECK_FALSE(train_set.count(i));
        CHECK(s.train.size() + s.test.size() == labels.size());
    }
    CHECK(total == labels.size());

    auto again = stratified_kfold(labels, 10, 77);
    for (size_t f = 0; f < splits.size(); ++f) {
        CHECK(splits[f].test == again[f].test);
        CHECK(splits[f].train == again[f].train);
    }

    std::vector<int> tiny(20, 0);
    tiny[0] = 1;
    tiny[1] = 1;
    CHECK_THROWS_AS(stratified_kfold(tiny, 10, 1), ClassTooSmall);
}
