#include "stcids/features.hpp"

#include <algorithm>
#include <random>

namespace stcids::features {

std::array<uint8_t, 8> pad_payload(const std::vector<uint8_t>& payload) {
    std::array<uint8_t, 8> out{};
    for (size_t i = 0; i < payload.size() && i < 8; ++i) out[i] = payload[i];
    return out;
}

RawRow frame_to_raw_features(const canbus::CanFrame& frame) {
    RawRow row{};
    row[0] = static_cast<uint8_t>((frame.can_id >> 8) & 0xF);
    row[1] = static_cast<uint8_t>((frame.can_id >> 4) & 0xF);
    row[2] = static_cast<uint8_t>(frame.can_id & 0xF);
    auto bytes = pad_payload(frame.payload);
    for (int b = 0; b < 8; ++b) {
        row[3 + 2 * b] = static_cast<uint8_t>(bytes[b] >> 4);
        row[4 + 2 * b] = static_cast<uint8_t>(bytes[b] & 0xF);
    }
    return row;
}

MinMaxParams fit_minmax(const std::vector<RawRow>& train_rows) {
    if (train_rows.empty()) throw EmptySet("fit_minmax needs a non-empty training set");
    MinMaxParams p;
    for (int f = 0; f < kFeatureCount; ++f) {
        p.x_min[f] = train_rows[0][f];
        p.x_max[f] = train_rows[0][f];
    }
    for (const auto& row : train_rows)
        for (int f = 0; f < kFeatureCount; ++f) {
            p.x_min[f] = std::min(p.x_min[f], static_cast<float>(row[f]));
            p.x_max[f] = std::max(p.x_max[f], static_cast<float>(row[f]));
        }
    return p;
}

float apply_minmax_one(float value, float x_min, float x_max) {
    if (x_max <= x_min) return 0.0f;  // constant feature carries no information
    float v = (value - x_min) / (x_max - x_min);
    return std::clamp(v, 0.0f, 1.0f);
}

std::array<float, kFeatureCount> apply_minmax(const RawRow& row, const MinMaxParams& params) {
    std::array<float, kFeatureCount> out{};
    for (int f = 0; f < kFeatureCount; ++f)
        out[f] = apply_minmax_one(row[f], params.x_min[f], params.x_max[f]);
    return out;
}

std::vector<FeatureVector> frames_to_vectors(const std::vector<canbus::CanFrame>& frames,
                                             const MinMaxParams& params) {
    std::vector<FeatureVector> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        FeatureVector v;
        v.values = apply_minmax(frame_to_raw_features(f), params);
        v.label = f.label == canbus::FrameLabel::Injected ? 1 : 0;
        out.push_back(v);
    }
    return out;
}

std::vector<FrameWindow> window_stream(const std::vector<FeatureVector>& vectors, int stride) {
    if (stride < 1) throw ConfigError("window stride must be >= 1");
    if (vectors.size() < static_cast<size_t>(kWindowHeight))
        throw StreamTooShort("stream shorter than one window");
    std::vector<FrameWindow> windows;
    for (size_t start = 0; start + kWindowHeight <= vectors.size(); start += stride) {
        FrameWindow w;
        w.start_index = start;
        for (int r = 0; r < kWindowHeight; ++r) {
            w.matrix[r] = vectors[start + r].values;
            if (vectors[start + r].label != 0) w.label = 1;
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<KFoldSplit> stratified_kfold(const std::vector<int>& labels, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("k must be >= 2");
    if (labels.empty()) throw EmptySet("cannot split an empty dataset");

    std::vector<size_t> by_class[2];
    for (size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i] != 0 ? 1 : 0;
        by_class[c].push_back(i);
    }
    for (int c = 0; c < 2; ++c)
        if (!by_class[c].empty() && by_class[c].size() < static_cast<size_t>(k))
            throw ClassTooSmall("class " + std::to_string(c) + " has fewer than k members");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<size_t>> fold_members(k);
    for (int c = 0; c < 2; ++c) {
        shuffle_indices(by_class[c], rng);
        for (size_t i = 0; i < by_class[c].size(); ++i)
            fold_members[i % static_cast<size_t>(k)].push_back(by_class[c][i]);
    }

    std::vector<KFoldSplit> splits(k);
    for (int f = 0; f < k; ++f) {
        auto& s = splits[f];
        s.test = fold_members[f];
        std::sort(s.test.begin(), s.test.end());
        for (int g = 0; g < k; ++g)
            if (g != f) s.train.insert(s.train.end(), fold_members[g].begin(), fold_members[g].end());
        std::sort(s.train.begin(), s.train.end());
    }
    return splits;
}

}  // namespace stcids::features
