#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcids/features.hpp"
#include "stcids/models.hpp"

namespace stcids::checkpoint {

struct BadMagic : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct TruncatedFile : Error {
    using Error::Error;
};

struct Metadata {
    uint64_t seed = 0;
    uint32_t epochs_trained = 0;
};

struct Checkpoint {
    models::ModelConfig config;
    features::MinMaxParams norm;
    Metadata meta;
    std::unique_ptr<models::Model<float>> model;
};

// Layout: "STCI" magic, u16 version, u32-length-prefixed text config block,
// u32 tensor count, then per tensor: u16 name length, name bytes, u8 rank,
// u32 extents, raw little-endian f32 data. load(save(m)) reproduces
// bit-identical predictions.
std::vector<uint8_t> save_checkpoint(models::Model<float>& model, const features::MinMaxParams& norm,
                                     const Metadata& meta);
Checkpoint load_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint_file(const std::string& path, models::Model<float>& model,
                          const features::MinMaxParams& norm, const Metadata& meta);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace stcids::checkpoint
