#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace srd {

// Per-trajectory streams are plain Mersenne twisters seeded from a hash of
// (master seed, index, label), so a stream never depends on scheduling.
using Rng = std::mt19937_64;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view label);

inline Rng make_stream(std::uint64_t master, std::uint64_t index, std::string_view label) {
    return Rng(derive_seed(master, index, label));
}

std::string sha256_hex(std::string_view data);

}  // namespace srd
