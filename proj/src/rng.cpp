#include "metar/rng.hpp"

#include <cmath>

#include "metar/types.hpp"

namespace metar {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

Rng Rng::derive(std::uint64_t seed, std::string_view stream, std::uint64_t index) {
    std::uint64_t mixed = splitmix64(seed);
    mixed = splitmix64(mixed ^ fnv1a64(stream));
    mixed = splitmix64(mixed ^ index);
    return Rng(mixed);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw Error("uniform_index: empty range");
    // Rejection on the top of the range keeps every residue equally likely.
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::uniform_real(double lo, double hi) {
    // 53 random bits -> [0, 1)
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

double Rng::normal(double mean, double stddev) {
    // Marsaglia polar method; the spare value is dropped to keep the stream
    // position a pure function of the number of calls.
    double u, v, s;
    do {
        u = uniform_real(-1.0, 1.0);
        v = uniform_real(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "dev") return Split::Dev;
    if (text == "test") return Split::Test;
    throw Error("unknown split '" + text + "' (expected train|dev|test)");
}

}  // namespace metar
