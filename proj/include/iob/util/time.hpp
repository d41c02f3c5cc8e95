#pragma once

#include <cmath>
#include <cstdint>

namespace iob {

/// Simulated time in integer nanoseconds.
using SimTime = std::int64_t;

inline constexpr SimTime kNanosPerSecond = 1'000'000'000;

constexpr SimTime from_seconds(double s) { return static_cast<SimTime>(std::llround(s * 1e9)); }
constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1e9; }

}  // namespace iob
