#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace iob {

// Every stochastic component draws from an explicitly seeded engine; nothing
// reads global or wall-clock entropy.
using Rng = std::mt19937_64;

/// Derives an independent stream seed from a root seed and a label path
/// (splitmix64 over the label bytes and integers).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::initializer_list<std::uint64_t> parts = {});

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace iob
