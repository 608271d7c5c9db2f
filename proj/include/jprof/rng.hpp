#pragma once

#include <cstdint>
#include <random>

namespace jprof {

// Deterministic RNG used wherever a seed is part of a contract.
// std::mt19937_64 is bit-stable across platforms; the distribution
// helpers below are hand-rolled because the standard distributions
// are not required to produce identical sequences everywhere.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, n). Modulo bias is below 2^-50 for the ranges used here.
    std::uint64_t below(std::uint64_t n) { return n ? eng_() % n : 0; }

    // Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace jprof
