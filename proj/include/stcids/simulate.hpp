#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <vector>

#include "stcids/canbus.hpp"

namespace stcids::simulate {

struct EmptyProfile : Error {
    using Error::Error;
};
struct MissingTargetId : Error {
    using Error::Error;
};

enum class AttackKind { DoS, Fuzzy, SpoofRpm, SpoofGear };

double default_injection_period_ms(AttackKind kind);  // 0.3 / 0.5 / 1.0

// Injection campaign description. Frames are inserted at fixed multiples of
// the injection period inside [window_start_s, window_end_s), coexisting with
// (never displacing) the normal traffic.
struct AttackSpec {
    AttackKind kind = AttackKind::DoS;
    double injection_period_ms = 0.0;  // 0 -> default for kind
    uint16_t target_id = 0;            // spoofing only
    std::array<uint8_t, 8> spoof_payload{};  // zero -> default for target
    bool spoof_payload_set = false;
    uint64_t rng_seed = 0;
    double window_start_s = 0.0;
    double window_end_s = 0.0;

    double period_ms() const {
        return injection_period_ms > 0 ? injection_period_ms : default_injection_period_ms(kind);
    }
};

// How one payload byte evolves across a scheduled ID's consecutive frames,
// mirroring the three behaviours observed in real captures: fixed constants,
// values cycling in a small range, and free bytes.
struct ByteModel {
    enum class Kind : uint8_t { Constant, Cycle, Free };
    Kind kind = Kind::Constant;
    std::vector<uint8_t> values;  // Constant: 1 value; Cycle: >=1 values

    static ByteModel constant(uint8_t v) { return {Kind::Constant, {v}}; }
    static ByteModel cycle(std::vector<uint8_t> vs) { return {Kind::Cycle, std::move(vs)}; }
    static ByteModel free() { return {Kind::Free, {}}; }
};

using PayloadModel = std::array<ByteModel, 8>;

struct TrafficProfile {
    canbus::EcuDirectory directory;
    std::map<uint16_t, PayloadModel> payload_models;
    double duration_s = 0.0;
};

// Bundled profile: the default directory's periodic IDs plus the three
// payload-characterised IDs (0x260, 0x316 "RPM", 0x43F "GEAR").
TrafficProfile default_profile(double duration_s);

// Profile file: one record per line,
//   `ID=0x316 tx=RPM period=10 bytes=05,22|23|24,*,0B,21|22|23|24,18,00,7F`
// where a byte is a constant hex value, a '|'-separated cycle, or `*` (free).
TrafficProfile load_profile(std::istream& in, double duration_s);
TrafficProfile load_profile_file(const std::string& path, double duration_s);

// Emits every scheduled ID at multiples of its period with small seeded
// jitter (uniform within ±2% of the period), sorted by timestamp, all Normal.
std::vector<canbus::CanFrame> generate_normal(const TrafficProfile& profile, uint64_t seed);

// The three injection attacks. Each returns the merged, timestamp-sorted
// stream; injected frames win ties against normal frames at equal timestamps.
std::vector<canbus::CanFrame> inject_dos(std::vector<canbus::CanFrame> traffic, const AttackSpec& spec);
std::vector<canbus::CanFrame> inject_fuzzy(std::vector<canbus::CanFrame> traffic, const AttackSpec& spec);
std::vector<canbus::CanFrame> inject_spoof(std::vector<canbus::CanFrame> traffic, const AttackSpec& spec);

std::vector<canbus::CanFrame> inject(std::vector<canbus::CanFrame> traffic, const AttackSpec& spec);

}  // namespace stcids::simulate
