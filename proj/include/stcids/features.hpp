#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stcids/canbus.hpp"

namespace stcids::features {

struct EmptySet : Error {
    using Error::Error;
};
struct StreamTooShort : Error {
    using Error::Error;
};
struct ClassTooSmall : Error {
    using Error::Error;
};

constexpr int kFeatureCount = 19;  // 3 ID hex digits + 16 payload hex digits
constexpr int kWindowHeight = 64;

// One frame reduced to 19 hex-digit values: the ID's three digits (most
// significant first) followed by high/low digits of the 8 padded payload
// bytes. Raw domain is {0..15}; normalized domain is [0,1].
using RawRow = std::array<uint8_t, kFeatureCount>;

struct FeatureVector {
    std::array<float, kFeatureCount> values{};
    int label = 0;  // 0 normal, 1 intrusion
};

struct MinMaxParams {
    std::array<float, kFeatureCount> x_min{};
    std::array<float, kFeatureCount> x_max{};

    bool operator==(const MinMaxParams&) const = default;
};

// 64 consecutive feature rows as one 2-D instance. Labelled intrusion when
// any constituent frame was injected.
struct FrameWindow {
    std::array<std::array<float, kFeatureCount>, kWindowHeight> matrix{};
    int label = 0;
    size_t start_index = 0;
};

// Right-pads with 0x00 to 8 bytes; original bytes keep their positions.
std::array<uint8_t, 8> pad_payload(const std::vector<uint8_t>& payload);

RawRow frame_to_raw_features(const canbus::CanFrame& frame);

// Per-feature min/max over the training split only.
MinMaxParams fit_minmax(const std::vector<RawRow>& train_rows);

// X_norm = (X - X_min) / (X_max - X_min), clamped to [0,1].
// Constant features (x_max == x_min) map to 0.
std::array<float, kFeatureCount> apply_minmax(const RawRow& row, const MinMaxParams& params);
float apply_minmax_one(float value, float x_min, float x_max);

std::vector<FeatureVector> frames_to_vectors(const std::vector<canbus::CanFrame>& frames,
                                             const MinMaxParams& params);

// Consecutive height-64 windows at the given stride; the trailing remainder
// shorter than a full window is dropped.
std::vector<FrameWindow> window_stream(const std::vector<FeatureVector>& vectors, int stride);

struct KFoldSplit {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

// Stratified k-fold: per-class seeded shuffle dealt round-robin, so per-fold
// class counts differ from exact proportionality by at most one item.
std::vector<KFoldSplit> stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed);

}  // namespace stcids::features
