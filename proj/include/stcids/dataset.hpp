#pragma once

#include <string>
#include <vector>

#include "stcids/features.hpp"
#include "stcids/models.hpp"
#include "stcids/tensor.hpp"

namespace stcids::dataset {

// Feature records ready for model consumption: per-frame 19-value rows
// (single mode) or 64x19 windows (window mode). Values as written by the
// preprocessor are raw hex digits in {0..15}; normalization happens against
// a training split's min-max fit (stored in the checkpoint), never here.
struct Dataset {
    models::ModelKind kind = models::ModelKind::SingleFrame;
    size_t count = 0;
    std::vector<float> x;  // count * record_size(), row-major
    std::vector<int> y;

    size_t record_size() const {
        return kind == models::ModelKind::SingleFrame
                   ? features::kFeatureCount
                   : static_cast<size_t>(features::kWindowHeight) * features::kFeatureCount;
    }
    const float* record(size_t i) const { return x.data() + i * record_size(); }
    float* record(size_t i) { return x.data() + i * record_size(); }
};

Dataset from_frames(const std::vector<canbus::CanFrame>& frames);
Dataset from_windows(const std::vector<canbus::CanFrame>& frames, int stride);

// Per-feature min/max fitted over the rows of the selected records only.
features::MinMaxParams fit_minmax(const Dataset& ds, const std::vector<size_t>& indices);
Dataset normalized(const Dataset& ds, const features::MinMaxParams& params);

// Gathers records into a batch tensor: [B,19] or [B,64,19].
neural::Ten<float> gather(const Dataset& ds, const std::vector<size_t>& indices, size_t begin,
                          size_t end);

// Binary container (magic "STCD"): all integers and floats little-endian,
// features as 32-bit floats, one label byte per record. A ".csv" path selects
// the text form instead: one record per line, features then integer label.
void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

}  // namespace stcids::dataset
