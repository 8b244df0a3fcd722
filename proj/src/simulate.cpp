#include "stcids/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace stcids::simulate {

using canbus::CanFrame;
using canbus::FrameLabel;

double default_injection_period_ms(AttackKind kind) {
    switch (kind) {
        case AttackKind::DoS: return 0.3;
        case AttackKind::Fuzzy: return 0.5;
        default: return 1.0;
    }
}

namespace {

constexpr double kJitterFraction = 0.02;

uint8_t model_byte(const ByteModel& m, size_t frame_index, std::mt19937_64& rng) {
    switch (m.kind) {
        case ByteModel::Kind::Constant: return m.values.at(0);
        case ByteModel::Kind::Cycle: return m.values[frame_index % m.values.size()];
        case ByteModel::Kind::Free: return static_cast<uint8_t>(draw_index(rng, 256));
    }
    return 0;
}

// Fallback payload behaviour for scheduled IDs without an explicit model:
// ID-derived constants with one cycling byte, so every ID keeps a stable
// spatial signature.
PayloadModel derived_model(uint16_t id) {
    PayloadModel m;
    uint64_t h = splitmix64(id);
    for (int i = 0; i < 8; ++i) m[i] = ByteModel::constant(static_cast<uint8_t>(h >> (i * 8)));
    uint64_t h2 = splitmix64(h);
    uint8_t base = static_cast<uint8_t>(h2);
    m[7] = ByteModel::cycle({base, static_cast<uint8_t>(base + 1), static_cast<uint8_t>(base + 2),
                             static_cast<uint8_t>(base + 3)});
    return m;
}

// Merge two timestamp-sorted streams; injected frames sort before normal
// frames at equal timestamps (the attack frame wins arbitration).
std::vector<CanFrame> merge_streams(std::vector<CanFrame> normal, std::vector<CanFrame> injected) {
    std::vector<CanFrame> out;
    out.reserve(normal.size() + injected.size());
    size_t i = 0, j = 0;
    while (i < normal.size() && j < injected.size()) {
        if (injected[j].timestamp <= normal[i].timestamp)
            out.push_back(std::move(injected[j++]));
        else
            out.push_back(std::move(normal[i++]));
    }
    while (j < injected.size()) out.push_back(std::move(injected[j++]));
    while (i < normal.size()) out.push_back(std::move(normal[i++]));
    return out;
}

// Injection instants: floor(window / period) frames at start + n*period.
std::vector<double> injection_times(const AttackSpec& spec) {
    double window_ms = (spec.window_end_s - spec.window_start_s) * 1000.0;
    if (window_ms <= 0) return {};
    double period = spec.period_ms();
    auto count = static_cast<size_t>(std::floor(window_ms / period + 1e-9));
    std::vector<double> times(count);
    for (size_t n = 0; n < count; ++n)
        times[n] = spec.window_start_s + static_cast<double>(n) * period * 1e-3;
    return times;
}

std::vector<CanFrame> run_injection(std::vector<CanFrame> traffic, const AttackSpec& spec,
                                    std::vector<CanFrame> frames) {
    std::sort(frames.begin(), frames.end(),
              [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
    return merge_streams(std::move(traffic), std::move(frames));
}

}  // namespace

std::vector<CanFrame> generate_normal(const TrafficProfile& profile, uint64_t seed) {
    std::vector<std::pair<uint16_t, int>> scheduled;
    for (const auto& [id, entry] : profile.directory.entries())
        if (entry.period_ms) scheduled.emplace_back(id, *entry.period_ms);
    if (scheduled.empty() || profile.duration_s <= 0)
        throw EmptyProfile("traffic profile has no scheduled IDs");

    std::vector<CanFrame> frames;
    for (const auto& [id, period_ms] : scheduled) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(id)));
        PayloadModel model;
        if (auto it = profile.payload_models.find(id); it != profile.payload_models.end())
            model = it->second;
        else
            model = derived_model(id);

        double period_s = period_ms * 1e-3;
        double jitter_span = period_s * kJitterFraction;
        auto slots = static_cast<size_t>(std::floor(profile.duration_s / period_s)) + 1;
        for (size_t k = 0; k <= slots; ++k) {
            double jitter = draw_uniform(rng, -jitter_span, jitter_span);
            double t = static_cast<double>(k) * period_s + jitter;
            if (t < 0.0) t = 0.0;
            if (t >= profile.duration_s) continue;
            CanFrame f;
            f.timestamp = t;
            f.can_id = id;
            f.dlc = 8;
            f.payload.resize(8);
            for (int b = 0; b < 8; ++b) f.payload[b] = model_byte(model[b], k, rng);
            f.label = FrameLabel::Normal;
            frames.push_back(std::move(f));
        }
    }
    std::stable_sort(frames.begin(), frames.end(),
                     [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
    return frames;
}

std::vector<CanFrame> inject_dos(std::vector<CanFrame> traffic, const AttackSpec& spec) {
    std::vector<CanFrame> frames;
    for (double t : injection_times(spec)) {
        CanFrame f;
        f.timestamp = t;
        f.can_id = 0x000;
        f.dlc = 8;
        f.payload.assign(8, 0x00);
        f.label = FrameLabel::Injected;
        frames.push_back(std::move(f));
    }
    return run_injection(std::move(traffic), spec, std::move(frames));
}

std::vector<CanFrame> inject_fuzzy(std::vector<CanFrame> traffic, const AttackSpec& spec) {
    std::mt19937_64 rng(spec.rng_seed);
    std::vector<CanFrame> frames;
    for (double t : injection_times(spec)) {
        CanFrame f;
        f.timestamp = t;
        f.can_id = static_cast<uint16_t>(draw_index(rng, canbus::kMaxStandardId + 1));
        f.dlc = 8;
        f.payload.resize(8);
        for (int b = 0; b < 8; ++b) f.payload[b] = static_cast<uint8_t>(draw_index(rng, 256));
        f.label = FrameLabel::Injected;
        frames.push_back(std::move(f));
    }
    return run_injection(std::move(traffic), spec, std::move(frames));
}

namespace {

std::array<uint8_t, 8> default_spoof_payload(AttackKind kind) {
    // Plausible forged commands: RPM byte 3 / gear byte 6 pinned to an
    // extreme of their observed ranges.
    if (kind == AttackKind::SpoofRpm) return {0x05, 0x22, 0xFF, 0x0B, 0x21, 0x18, 0x00, 0x7F};
    return {0x10, 0x50, 0x60, 0xFF, 0x46, 0xF0, 0x0A, 0x00};
}

}  // namespace

std::vector<CanFrame> inject_spoof(std::vector<CanFrame> traffic, const AttackSpec& spec) {
    if (spec.kind != AttackKind::SpoofRpm && spec.kind != AttackKind::SpoofGear)
        throw ConfigError("inject_spoof requires a spoofing attack kind");
    if (spec.target_id == 0 || spec.target_id > canbus::kMaxStandardId)
        throw MissingTargetId("spoofing attack requires a valid target_id");
    std::array<uint8_t, 8> payload =
        spec.spoof_payload_set ? spec.spoof_payload : default_spoof_payload(spec.kind);

    std::vector<CanFrame> frames;
    for (double t : injection_times(spec)) {
        CanFrame f;
        f.timestamp = t;
        f.can_id = spec.target_id;
        f.dlc = 8;
        f.payload.assign(payload.begin(), payload.end());
        f.label = FrameLabel::Injected;
        frames.push_back(std::move(f));
    }
    return run_injection(std::move(traffic), spec, std::move(frames));
}

std::vector<CanFrame> inject(std::vector<CanFrame> traffic, const AttackSpec& spec) {
    switch (spec.kind) {
        case AttackKind::DoS: return inject_dos(std::move(traffic), spec);
        case AttackKind::Fuzzy: return inject_fuzzy(std::move(traffic), spec);
        default: return inject_spoof(std::move(traffic), spec);
    }
}

TrafficProfile default_profile(double duration_s) {
    TrafficProfile p;
    p.duration_s = duration_s;
    p.directory = canbus::default_directory();
    p.directory.add(0x260, {"N/A", 10, {}});
    p.directory.add(0x316, {"RPM", 10, {}});
    p.directory.add(0x43F, {"GEAR", 20, {}});

    auto c = [](uint8_t v) { return ByteModel::constant(v); };
    p.payload_models[0x260] = {c(0x05), c(0x22), c(0x00), c(0x30), c(0xFF), c(0x99), c(0x63),
                               ByteModel::cycle({0x38, 0x0B, 0x1A, 0x29})};
    p.payload_models[0x316] = {c(0x05),
                               ByteModel::cycle({0x22, 0x23, 0x24}),
                               ByteModel::free(),
                               c(0x0B),
                               ByteModel::cycle({0x21, 0x22, 0x23, 0x24}),
                               c(0x18),
                               c(0x00),
                               c(0x7F)};
    p.payload_models[0x43F] = {c(0x10), c(0x50), c(0x60), c(0xFF), c(0x46),
                               ByteModel::cycle({0x28, 0x0C, 0x10, 0xF0}), c(0x0A), c(0x00)};
    return p;
}

namespace {

ByteModel parse_byte_model(std::string_view tok) {
    if (tok == "*") return ByteModel::free();
    std::vector<uint8_t> vals;
    size_t start = 0;
    while (start <= tok.size()) {
        size_t bar = tok.find('|', start);
        std::string_view piece =
            bar == std::string_view::npos ? tok.substr(start) : tok.substr(start, bar - start);
        uint32_t v = 0;
        if (!parse_hex(piece, v) || v > 0xFF)
            throw ConfigError("bad byte model token: " + std::string(tok));
        vals.push_back(static_cast<uint8_t>(v));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    if (vals.size() == 1) return ByteModel::constant(vals[0]);
    return ByteModel::cycle(std::move(vals));
}

}  // namespace

TrafficProfile load_profile(std::istream& in, double duration_s) {
    TrafficProfile p;
    p.duration_s = duration_s;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v = line;
        if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
        if (auto c = v.find('#'); c != std::string_view::npos) v = v.substr(0, c);
        std::istringstream tokens{std::string(v)};
        std::string tok;
        std::optional<uint16_t> id;
        canbus::EcuEntry entry;
        std::optional<PayloadModel> model;
        bool any = false;
        while (tokens >> tok) {
            any = true;
            auto eq = tok.find('=');
            if (eq == std::string::npos) throw ConfigError("bad profile token: " + tok);
            std::string key = tok.substr(0, eq);
            std::string val = tok.substr(eq + 1);
            if (key == "ID") {
                std::string_view hv = val;
                if (hv.starts_with("0x") || hv.starts_with("0X")) hv.remove_prefix(2);
                uint32_t raw = 0;
                if (!parse_hex(hv, raw) || raw > canbus::kMaxStandardId)
                    throw ConfigError("bad profile id: " + val);
                id = static_cast<uint16_t>(raw);
            } else if (key == "tx") {
                entry.transmitter = val;
            } else if (key == "period") {
                entry.period_ms = std::stoi(val);
            } else if (key == "rx") {
                std::string_view rest = val;
                while (!rest.empty()) {
                    size_t comma = rest.find(',');
                    entry.receivers.emplace_back(rest.substr(0, comma));
                    if (comma == std::string_view::npos) break;
                    rest.remove_prefix(comma + 1);
                }
            } else if (key == "bytes") {
                PayloadModel m;
                std::string_view rest = val;
                for (int b = 0; b < 8; ++b) {
                    size_t comma = rest.find(',');
                    std::string_view piece = comma == std::string_view::npos ? rest : rest.substr(0, comma);
                    if (piece.empty()) throw ConfigError("profile bytes= needs 8 entries");
                    m[b] = parse_byte_model(piece);
                    if (comma == std::string_view::npos) {
                        if (b != 7) throw ConfigError("profile bytes= needs 8 entries");
                        rest = {};
                    } else {
                        rest.remove_prefix(comma + 1);
                    }
                }
                model = m;
            } else {
                throw ConfigError("unknown profile key: " + key);
            }
        }
        if (!any) continue;
        if (!id) throw ConfigError("profile record without ID=");
        if (!entry.period_ms) throw ConfigError("profile record without period=");
        p.directory.add(*id, entry);
        if (model) p.payload_models[*id] = *model;
    }
    if (p.directory.entries().empty()) throw EmptyProfile("profile file has no records");
    return p;
}

TrafficProfile load_profile_file(const std::string& path, double duration_s) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open profile file: " + path);
    return load_profile(in, duration_s);
}

}  // namespace stcids::simulate
