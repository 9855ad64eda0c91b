#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace aqem {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Largest N for which double precision reproduces the sine state faithfully.
inline constexpr int kMaxPhotons = 100;

/// Raised when N exceeds the double-precision validated range.
class PrecisionError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A measurement branch with zero probability was requested.
class ZeroProbabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Angle in radians, canonically reduced to [0, 2pi).
class PhaseAngle {
public:
    constexpr PhaseAngle() = default;
    explicit PhaseAngle(double radians) : value_(reduce(radians)) {}

    double value() const { return value_; }

    static double reduce(double radians) {
        double r = std::fmod(radians, kTwoPi);
        if (r < 0.0) r += kTwoPi;
        // fmod of a tiny negative number can round back up to 2pi
        if (r >= kTwoPi) r = 0.0;
        return r;
    }

    friend bool operator==(PhaseAngle a, PhaseAngle b) { return a.value_ == b.value_; }

private:
    double value_ = 0.0;
};

// Signed difference a - b folded into (-pi, pi].
inline double circular_difference(double a, double b) {
    double d = std::remainder(a - b, kTwoPi);
    if (d <= -std::numbers::pi) d += kTwoPi;
    return d;
}

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based stream derivation: the seed depends only on (master, counters).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ (b * 0xd1342543de82ef95ULL));
    h = splitmix64(h ^ (c * 0xaf251af3b0f025b5ULL));
    return h;
}

inline Rng make_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) {
    return Rng(derive_seed(master, a, b, c));
}

// Uniform double in [0, 1) from 53 random bits; portable across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace aqem
