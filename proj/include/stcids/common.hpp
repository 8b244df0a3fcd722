#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stcids {

// Base for all library errors; subcommands map these to exit code 1,
// config problems to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

// ---- hex helpers -----------------------------------------------------------

inline bool is_hex_digit(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

inline int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Parses a hex field (no 0x prefix required, case-insensitive).
// Returns false on empty input or non-hex characters.
inline bool parse_hex(std::string_view s, uint32_t& out) {
    if (s.empty() || s.size() > 8) return false;
    uint32_t v = 0;
    for (char c : s) {
        int d = hex_value(c);
        if (d < 0) return false;
        v = (v << 4) | static_cast<uint32_t>(d);
    }
    out = v;
    return true;
}

inline std::string to_hex(uint32_t v, int min_digits) {
    static const char* digits = "0123456789ABCDEF";
    std::string s;
    while (v != 0 || static_cast<int>(s.size()) < min_digits) {
        s.push_back(digits[v & 0xF]);
        v >>= 4;
    }
    return {s.rbegin(), s.rend()};
}

// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    return {buf, res.ptr};
}

// ---- deterministic rng helpers ---------------------------------------------
//
// All randomness flows through std::mt19937_64 plus the hand-rolled draws
// below, so byte streams depend only on the seed, never on the standard
// library's distribution implementations.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double u01_from_bits(uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <class Rng>
double draw_u01(Rng& rng) {
    return u01_from_bits(rng());
}

template <class Rng>
double draw_uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * draw_u01(rng);
}

// Uniform integer in [0, n). Modulo bias is < 2^-50 for every n used here.
template <class Rng>
uint64_t draw_index(Rng& rng, uint64_t n) {
    return rng() % n;
}

template <class Rng>
void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(draw_index(rng, i));
        std::swap(idx[i - 1], idx[j]);
    }
}

// ---- bounded parallelism -----------------------------------------------------

// Worker cap: STC_IDS_THREADS when set, else hardware concurrency.
inline int thread_count() {
    if (const char* env = std::getenv("STC_IDS_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(begin, end) over a contiguous partition of [0, n).
// Every output element must be written by exactly one index so results are
// identical for any worker count.
template <class Body>
void parallel_for(size_t n, const Body& body) {
    int workers = thread_count();
    if (workers <= 1 || n < 2) {
        if (n > 0) body(size_t{0}, n);
        return;
    }
    size_t t = static_cast<size_t>(workers);
    if (t > n) t = n;
    size_t chunk = (n + t - 1) / t;
    std::vector<std::thread> pool;
    pool.reserve(t - 1);
    for (size_t w = 1; w < t; ++w) {
        size_t b = w * chunk;
        size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    body(size_t{0}, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

}  // namespace stcids
