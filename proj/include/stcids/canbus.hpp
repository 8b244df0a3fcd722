#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stcids/common.hpp"

namespace stcids::canbus {

struct MalformedRecord : Error {
    using Error::Error;
};
struct IdOutOfRange : Error {
    using Error::Error;
};
struct DuplicateId : Error {
    using Error::Error;
};

enum class FrameLabel : uint8_t { Normal = 0, Injected = 1 };

enum class LogFormat { CarHackingCsv, CandumpText };

constexpr uint16_t kMaxStandardId = 0x7FF;

// One timestamped CAN message. Standard (11-bit) frames only; payload holds
// the bytes actually present on the log line, which may be fewer than dlc
// (short payloads are padded during feature extraction, not here).
struct CanFrame {
    double timestamp = 0.0;  // seconds since capture start
    uint16_t can_id = 0;     // 0x000 .. 0x7FF
    uint8_t dlc = 0;         // 0 .. 8
    std::vector<uint8_t> payload;
    FrameLabel label = FrameLabel::Normal;

    bool operator==(const CanFrame&) const = default;
};

// Directory of who transmits a CAN ID, on what period, and who listens.
struct EcuEntry {
    std::string transmitter;
    std::optional<int> period_ms;  // absent for event-triggered IDs
    std::vector<std::string> receivers;

    bool operator==(const EcuEntry&) const = default;
};

class EcuDirectory {
public:
    EcuDirectory() = default;

    void add(uint16_t can_id, EcuEntry entry);
    const EcuEntry* find(uint16_t can_id) const;
    const std::map<uint16_t, EcuEntry>& entries() const { return entries_; }

    // One record per line: `ID=0x101 tx=EMS period=10 rx=TCU,ESP,EPB,T-BOX`.
    // `period=` may be omitted for event-triggered IDs, `rx=` for sink-less
    // ones. '#' starts a comment.
    static EcuDirectory load(std::istream& in);
    static EcuDirectory load_file(const std::string& path);
    void save(std::ostream& out) const;

private:
    std::map<uint16_t, EcuEntry> entries_;
};

// The partial transmitter/period/receiver map bundled as the default
// directory for traceback when no directory file is given.
EcuDirectory default_directory();

// Result of an ECU lookup; `unknown()` when the ID is not in the directory.
struct TraceResult {
    std::string transmitter;
    std::vector<std::string> receivers;
    bool known = false;

    static TraceResult unknown() { return {}; }
};

TraceResult trace_ecu(uint16_t can_id, const EcuDirectory& dir);

// Parses one `line` in `format`.
//   CarHackingCsv: timestamp,ID-hex,dlc,<payload hex columns>,flag  (flag R|T)
//   CandumpText:   (timestamp) iface ID#HEXPAYLOAD                  (no label)
// Throws MalformedRecord / IdOutOfRange. Payload columns fewer than dlc are
// accepted; more than dlc is malformed (never silently truncate).
CanFrame parse_log_line(std::string_view line, LogFormat format);

// Inverse of parse_log_line on valid frames: parse(write(f)) == f.
// (CandumpText carries no label, so Injected frames re-parse as Normal.)
std::string write_log_line(const CanFrame& frame, LogFormat format);

// Whole-file helpers. Readers enforce non-decreasing timestamps.
std::vector<CanFrame> read_log(std::istream& in, LogFormat format);
std::vector<CanFrame> read_log_file(const std::string& path, LogFormat format);
void write_log(std::ostream& out, const std::vector<CanFrame>& frames, LogFormat format);

}  // namespace stcids::canbus
