#pragma once

#include <cstdint>
#include <string_view>

namespace stereoforge {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Stable per-item seed; independent of the standard library implementation.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    return splitmix64(splitmix64(base ^ fnv1a(tag)) + index);
}

} // namespace stereoforge
