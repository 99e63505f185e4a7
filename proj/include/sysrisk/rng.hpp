#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace sysrisk {

// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a, used to turn names (sectors, substreams) into stable stream keys.
constexpr std::uint64_t hash_name(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Counter-based stream: the i-th output is a pure function of (key, i), so any
// (seed, window, path, substream) tuple yields the same numbers regardless of
// which thread draws them or in what order streams are visited.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr Stream() = default;
    constexpr explicit Stream(std::uint64_t key) : key_(mix64(key)) {}

    // Derive an independent child stream.
    constexpr Stream child(std::uint64_t id) const noexcept { return Stream(key_ ^ mix64(id + 0x632be59bd9b4e019ULL)); }
    constexpr Stream child(std::string_view name) const noexcept { return child(hash_name(name)); }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    constexpr std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace sysrisk
