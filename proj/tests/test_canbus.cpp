#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "stcids/canbus.hpp"

using namespace stcids;
using namespace stcids::canbus;

TEST_CASE("parse car-hacking csv line") {
    auto f = parse_log_line("1478198376.389427,0316,8,05,22,6a,0b,21,18,00,7f,R",
                            LogFormat::CarHackingCsv);
    CHECK(f.can_id == 0x316);
    CHECK(f.dlc == 8);
    CHECK(f.payload == std::vector<uint8_t>{0x05, 0x22, 0x6A, 0x0B, 0x21, 0x18, 0x00, 0x7F});
    CHECK(f.label == FrameLabel::Normal);
    CHECK(f.timestamp == doctest::Approx(1478198376.389427));
}

TEST_CASE("parse injected all-zero frame") {
    auto f = parse_log_line("0.0,0000,8,00,00,00,00,00,00,00,00,T", LogFormat::CarHackingCsv);
    CHECK(f.can_id == 0x000);
    CHECK(f.label == FrameLabel::Injected);
    for (auto b : f.payload) CHECK(b == 0);
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse_log_line("", LogFormat::CarHackingCsv), MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("1.0,0316", LogFormat::CarHackingCsv), MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("1.0,03q6,8,00,R", LogFormat::CarHackingCsv), MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("1.0,0fff,8,00,R", LogFormat::CarHackingCsv), IdOutOfRange);
    CHECK_THROWS_AS(parse_log_line("1.0,0316,8,00,X", LogFormat::CarHackingCsv), MalformedRecord);
    // more payload columns than dlc must never be silently truncated
    CHECK_THROWS_AS(parse_log_line("1.0,0316,2,00,11,22,R", LogFormat::CarHackingCsv),
                    MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("", LogFormat::CandumpText), MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("(1.0) can0 316", LogFormat::CandumpText), MalformedRecord);
    CHECK_THROWS_AS(parse_log_line("(1.0) can0 FFF#00", LogFormat::CandumpText), IdOutOfRange);
    CHECK_THROWS_AS(parse_log_line("(1.0) can0 316#0", LogFormat::CandumpText), MalformedRecord);
}

TEST_CASE("short payloads are accepted and kept short") {
    auto f = parse_log_line("2.5,02c0,8,05,21,R", LogFormat::CarHackingCsv);
    CHECK(f.dlc == 8);
    CHECK(f.payload.size() == 2);
}

TEST_CASE("candump parsing") {
    auto f = parse_log_line("(1478198376.389427) can0 316#05226A0B2118007F",
                            LogFormat::CandumpText);
    CHECK(f.can_id == 0x316);
    CHECK(f.dlc == 8);
    CHECK(f.payload[2] == 0x6A);
    CHECK(f.label == FrameLabel::Normal);
}

TEST_CASE("write round-trips the 0x316 frame") {
    auto f = parse_log_line("1478198376.389427,0316,8,05,22,6a,0b,21,18,00,7f,R",
                            LogFormat::CarHackingCsv);
    for (auto fmt : {LogFormat::CarHackingCsv, LogFormat::CandumpText}) {
        auto g = parse_log_line(write_log_line(f, fmt), fmt);
        CHECK(g == f);
    }
}

TEST_CASE("write emits exactly dlc data columns") {
    CanFrame f;
    f.timestamp = 1.5;
    f.can_id = 0x2B0;
    f.dlc = 2;
    f.payload = {0xAB, 0x05};
    auto line = write_log_line(f, LogFormat::CarHackingCsv);
    CHECK(line == "1.5,2B0,2,AB,05,R");
}

static CanFrame random_frame(std::mt19937_64& rng, bool allow_injected) {
    CanFrame f;
    f.timestamp = draw_uniform(rng, 0.0, 1e6);
    f.can_id = static_cast<uint16_t>(draw_index(rng, 0x800));
    f.dlc = static_cast<uint8_t>(draw_index(rng, 9));
    f.payload.resize(f.dlc);
    for (auto& b : f.payload) b = static_cast<uint8_t>(draw_index(rng, 256));
    f.label = allow_injected && draw_index(rng, 2) ? FrameLabel::Injected : FrameLabel::Normal;
    return f;
}

TEST_CASE("10k random frames round-trip losslessly") {
    std::mt19937_64 rng(20240817);
    for (int i = 0; i < 10000; ++i) {
        // CandumpText carries no label column, so its round-trip property is
        // over Normal-labelled frames.
        CanFrame fc = random_frame(rng, true);
        CHECK(parse_log_line(write_log_line(fc, LogFormat::CarHackingCsv),
                             LogFormat::CarHackingCsv) == fc);
        CanFrame fd = random_frame(rng, false);
        CHECK(parse_log_line(write_log_line(fd, LogFormat::CandumpText), LogFormat::CandumpText) ==
              fd);
    }
}

TEST_CASE("log reader enforces non-decreasing timestamps") {
    std::istringstream ok("1.0,101,1,00,R\n1.0,101,1,00,R\n2.0,101,1,00,R\n");
    CHECK(read_log(ok, LogFormat::CarHackingCsv).size() == 3);
    std::istringstream bad("2.0,101,1,00,R\n1.0,101,1,00,R\n");
    CHECK_THROWS_AS(read_log(bad, LogFormat::CarHackingCsv), MalformedRecord);
}

TEST_CASE("trace_ecu against the bundled directory") {
    auto dir = default_directory();
    auto r = trace_ecu(0x101, dir);
    REQUIRE(r.known);
    CHECK(r.transmitter == "EMS");
    CHECK(r.receivers == std::vector<std::string>{"TCU", "ESP", "EPB", "T-BOX"});

    auto r2 = trace_ecu(0x2EA, dir);
    REQUIRE(r2.known);
    CHECK(r2.transmitter == "ABS");
    CHECK(r2.receivers == std::vector<std::string>{"EMS", "TCU", "EPB", "ICU", "T-BOX", "APA"});

    CHECK_FALSE(trace_ecu(0x7FF, dir).known);
}

TEST_CASE("directory file round-trip and validation") {
    auto dir = default_directory();
    std::ostringstream out;
    dir.save(out);
    std::istringstream in(out.str());
    auto loaded = EcuDirectory::load(in);
    CHECK(loaded.entries() == dir.entries());

    std::istringstream dup("ID=0x101 tx=A period=10\nID=0x101 tx=B period=20\n");
    CHECK_THROWS_AS(EcuDirectory::load(dup), DuplicateId);

    std::istringstream event("ID=0x20 tx=BCM rx=ICU\n");
    auto d2 = EcuDirectory::load(event);
    REQUIRE(d2.find(0x20) != nullptr);
    CHECK_FALSE(d2.find(0x20)->period_ms.has_value());
}
