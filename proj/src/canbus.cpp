#include "stcids/canbus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace stcids::canbus {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

double parse_timestamp(std::string_view s, std::string_view line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 0.0)
        throw MalformedRecord("bad timestamp '" + std::string(s) + "' in: " + std::string(line));
    return v;
}

uint16_t parse_id(std::string_view s, std::string_view line) {
    uint32_t id = 0;
    if (!parse_hex(s, id))
        throw MalformedRecord("bad CAN id '" + std::string(s) + "' in: " + std::string(line));
    if (id > kMaxStandardId)
        throw IdOutOfRange("CAN id 0x" + to_hex(id, 3) + " exceeds 0x7FF in: " + std::string(line));
    return static_cast<uint16_t>(id);
}

uint8_t parse_byte(std::string_view s, std::string_view line) {
    uint32_t b = 0;
    if (s.empty() || s.size() > 2 || !parse_hex(s, b))
        throw MalformedRecord("bad payload byte '" + std::string(s) + "' in: " + std::string(line));
    return static_cast<uint8_t>(b);
}

CanFrame parse_csv(std::string_view line) {
    auto fields = split(line, ',');
    // timestamp, id, dlc, <payload...>, flag
    if (fields.size() < 4)
        throw MalformedRecord("expected at least 4 fields in: " + std::string(line));

    CanFrame f;
    f.timestamp = parse_timestamp(fields[0], line);
    f.can_id = parse_id(fields[1], line);

    int dlc = -1;
    {
        auto s = fields[2];
        int v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc{} && res.ptr == s.data() + s.size()) dlc = v;
    }
    if (dlc < 0 || dlc > 8)
        throw MalformedRecord("bad dlc '" + std::string(fields[2]) + "' in: " + std::string(line));
    f.dlc = static_cast<uint8_t>(dlc);

    size_t payload_cols = fields.size() - 4;
    if (payload_cols > static_cast<size_t>(dlc))
        throw MalformedRecord("more payload columns than dlc in: " + std::string(line));
    f.payload.reserve(payload_cols);
    for (size_t i = 0; i < payload_cols; ++i) f.payload.push_back(parse_byte(fields[3 + i], line));

    auto flag = fields.back();
    if (flag == "R")
        f.label = FrameLabel::Normal;
    else if (flag == "T")
        f.label = FrameLabel::Injected;
    else
        throw MalformedRecord("bad flag '" + std::string(flag) + "' in: " + std::string(line));
    return f;
}

CanFrame parse_candump(std::string_view line) {
    // (timestamp) iface ID#HEXPAYLOAD
    if (line.empty() || line.front() != '(')
        throw MalformedRecord("expected '(timestamp)' in: " + std::string(line));
    size_t close = line.find(')');
    if (close == std::string_view::npos)
        throw MalformedRecord("unterminated timestamp in: " + std::string(line));

    CanFrame f;
    f.timestamp = parse_timestamp(line.substr(1, close - 1), line);

    size_t p = line.find_first_not_of(' ', close + 1);
    if (p == std::string_view::npos)
        throw MalformedRecord("missing interface in: " + std::string(line));
    size_t iface_end = line.find(' ', p);
    if (iface_end == std::string_view::npos)
        throw MalformedRecord("missing frame body in: " + std::string(line));

    size_t body_start = line.find_first_not_of(' ', iface_end);
    if (body_start == std::string_view::npos)
        throw MalformedRecord("missing frame body in: " + std::string(line));
    std::string_view body = line.substr(body_start);
    if (auto sp = body.find(' '); sp != std::string_view::npos) body = body.substr(0, sp);

    size_t hash = body.find('#');
    if (hash == std::string_view::npos)
        throw MalformedRecord("missing '#' separator in: " + std::string(line));
    f.can_id = parse_id(body.substr(0, hash), line);

    std::string_view data = body.substr(hash + 1);
    if (data.size() % 2 != 0)
        throw MalformedRecord("odd payload digit count in: " + std::string(line));
    if (data.size() / 2 > 8)
        throw MalformedRecord("payload longer than 8 bytes in: " + std::string(line));
    for (size_t i = 0; i < data.size(); i += 2) f.payload.push_back(parse_byte(data.substr(i, 2), line));
    f.dlc = static_cast<uint8_t>(f.payload.size());
    f.label = FrameLabel::Normal;  // candump carries no label column
    return f;
}

void check_frame(const CanFrame& f) {
    if (f.can_id > kMaxStandardId) throw IdOutOfRange("frame id exceeds 0x7FF");
    if (f.dlc > 8 || f.payload.size() > f.dlc) throw MalformedRecord("frame payload/dlc mismatch");
}

}  // namespace

CanFrame parse_log_line(std::string_view line, LogFormat format) {
    line = strip_cr(line);
    if (line.empty()) throw MalformedRecord("empty record");
    return format == LogFormat::CarHackingCsv ? parse_csv(line) : parse_candump(line);
}

std::string write_log_line(const CanFrame& frame, LogFormat format) {
    check_frame(frame);
    std::string out;
    if (format == LogFormat::CarHackingCsv) {
        out += format_double(frame.timestamp);
        out += ',';
        out += to_hex(frame.can_id, 3);
        out += ',';
        out += std::to_string(frame.dlc);
        for (uint8_t b : frame.payload) {
            out += ',';
            out += to_hex(b, 2);
        }
        out += ',';
        out += frame.label == FrameLabel::Injected ? 'T' : 'R';
    } else {
        out += '(';
        out += format_double(frame.timestamp);
        out += ") can0 ";
        out += to_hex(frame.can_id, 3);
        out += '#';
        for (uint8_t b : frame.payload) out += to_hex(b, 2);
    }
    return out;
}

std::vector<CanFrame> read_log(std::istream& in, LogFormat format) {
    std::vector<CanFrame> frames;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = strip_cr(line);
        if (v.empty()) continue;
        CanFrame f = parse_log_line(v, format);
        if (!frames.empty() && f.timestamp < frames.back().timestamp)
            throw MalformedRecord("timestamps decrease at line " + std::to_string(lineno));
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<CanFrame> read_log_file(const std::string& path, LogFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open log file: " + path);
    return read_log(in, format);
}

void write_log(std::ostream& out, const std::vector<CanFrame>& frames, LogFormat format) {
    for (const auto& f : frames) {
        out << write_log_line(f, format);
        out << '\n';
    }
}

void EcuDirectory::add(uint16_t can_id, EcuEntry entry) {
    if (entries_.count(can_id))
        throw DuplicateId("duplicate directory entry for 0x" + to_hex(can_id, 3));
    if (entry.period_ms && *entry.period_ms <= 0)
        throw ConfigError("period must be positive for 0x" + to_hex(can_id, 3));
    entries_.emplace(can_id, std::move(entry));
}

const EcuEntry* EcuDirectory::find(uint16_t can_id) const {
    auto it = entries_.find(can_id);
    return it == entries_.end() ? nullptr : &it->second;
}

EcuDirectory EcuDirectory::load(std::istream& in) {
    EcuDirectory dir;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v = strip_cr(line);
        if (auto c = v.find('#'); c != std::string_view::npos) v = v.substr(0, c);
        while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
        while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
        if (v.empty()) continue;

        std::optional<uint16_t> id;
        EcuEntry entry;
        std::istringstream tokens{std::string(v)};
        std::string tok;
        while (tokens >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) throw ConfigError("bad directory token: " + tok);
            std::string key = tok.substr(0, eq);
            std::string val = tok.substr(eq + 1);
            if (key == "ID") {
                std::string_view hv = val;
                if (hv.starts_with("0x") || hv.starts_with("0X")) hv.remove_prefix(2);
                uint32_t raw = 0;
                if (!parse_hex(hv, raw) || raw > kMaxStandardId)
                    throw ConfigError("bad directory id: " + val);
                id = static_cast<uint16_t>(raw);
            } else if (key == "tx") {
                entry.transmitter = val;
            } else if (key == "period") {
                if (val != "-" && !val.empty()) entry.period_ms = std::stoi(val);
            } else if (key == "rx") {
                if (!val.empty())
                    for (auto r : split(val, ','))
                        if (!r.empty()) entry.receivers.emplace_back(r);
            } else {
                throw ConfigError("unknown directory key: " + key);
            }
        }
        if (!id) throw ConfigError("directory record without ID=: " + std::string(v));
        dir.add(*id, std::move(entry));
    }
    return dir;
}

EcuDirectory EcuDirectory::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open directory file: " + path);
    return load(in);
}

void EcuDirectory::save(std::ostream& out) const {
    for (const auto& [id, e] : entries_) {
        out << "ID=0x" << to_hex(id, 3) << " tx=" << e.transmitter;
        if (e.period_ms) out << " period=" << *e.period_ms;
        if (!e.receivers.empty()) {
            out << " rx=";
            for (size_t i = 0; i < e.receivers.size(); ++i) {
                if (i) out << ',';
                out << e.receivers[i];
            }
        }
        out << '\n';
    }
}

EcuDirectory default_directory() {
    EcuDirectory dir;
    dir.add(0x101, {"EMS", 10, {"TCU", "ESP", "EPB", "T-BOX"}});
    dir.add(0x278, {"EMS", 10, {"TCU", "GSM", "ABS", "ESP", "EPS", "EPB", "PEPS"}});
    dir.add(0x281, {"EMS", 100, {"TCU", "AC", "ICU", "HUD", "T-BOX"}});
    dir.add(0x1A0, {"TCU", 10, {"EMS", "GSM", "ESP", "EPB", "PEPS", "DRC", "PDC"}});
    dir.add(0x211, {"ESP", 10, {"TCU", "ESP", "EPB", "T-BOX"}});
    dir.add(0x2EA, {"ABS", 20, {"EMS", "TCU", "EPB", "ICU", "T-BOX", "APA"}});
    dir.add(0x68A, {"NVS", 500, {"HUD", "PSW"}});
    return dir;
}

TraceResult trace_ecu(uint16_t can_id, const EcuDirectory& dir) {
    const EcuEntry* e = dir.find(can_id);
    if (!e) return TraceResult::unknown();
    return {e->transmitter, e->receivers, true};
}

}  // namespace stcids::canbus
