#pragma once

#include <cstdint>
#include <string_view>

namespace fitcap {

// FNV-1a, 64 bit. Stable across platforms and runs (std::hash is not).
constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Every random stream in a run hangs off the experiment seed through a role
// tag ("split", "generator/init", "sampler", ...), so that streams are
// independent of each other and of scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view role,
                                    std::uint64_t index = 0) {
    return splitmix64(splitmix64(seed ^ fnv1a64(role)) + index);
}

// libtorch generators take a signed 64-bit seed in some entry points.
constexpr std::int64_t torch_seed(std::uint64_t s) {
    return static_cast<std::int64_t>(s & 0x7fffffffffffffffULL);
}

}  // namespace fitcap
