#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qmcgsa {

// 64-bit FNV-1a. Used for content keys (reference cache, manifests), not security.
class Fnv1a {
public:
    Fnv1a& update(std::string_view bytes) noexcept {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& update(const void* data, std::size_t size) noexcept {
        return update(std::string_view(static_cast<const char*>(data), size));
    }
    [[nodiscard]] std::uint64_t digest() const noexcept { return state_; }
    [[nodiscard]] std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

[[nodiscard]] std::string to_hex(std::uint64_t value);
[[nodiscard]] std::uint64_t fnv1a(std::string_view bytes) noexcept;

/// splitmix64 finalizer; the seed-splitting rule for independent PRNG runs.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives the seed of sub-stream `tag` from `master`.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) noexcept {
    return splitmix64(master ^ splitmix64(tag));
}

}  // namespace qmcgsa
