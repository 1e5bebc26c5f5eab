#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metar {

// Named random streams derived from a single run seed. Every consumer
// (sampler, init, negatives, eval-negatives) owns an independent engine so
// that adding draws in one place never shifts another stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng derive(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

    // Uniform integer in [0, n). Unbiased; independent of the stdlib's
    // distribution implementation.
    std::uint64_t uniform_index(std::uint64_t n);
    double uniform_real(double lo, double hi);
    double normal(double mean, double stddev);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace metar
