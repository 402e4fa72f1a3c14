#pragma once

#include <cstdint>
#include <random>

namespace dblms {

/// Independent random streams per (seed, trial, role). Each stream is its own
/// engine seeded through seed_seq, so trials can run on any thread in any
/// order and still draw identical values.
enum class StreamRole : std::uint32_t { plant = 0, input = 1, noise = 2 };

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial,
                                   StreamRole role) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(role), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace dblms
