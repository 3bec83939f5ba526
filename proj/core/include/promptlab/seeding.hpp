#pragma once

#include <cstdint>
#include <string_view>

namespace promptlab {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

/// Independent, reproducible child seed for a labelled sub-task.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
    return mix64(master ^ fnv1a64(label));
}

}  // namespace promptlab
