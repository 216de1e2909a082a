#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace reco {

// Streaming FNV-1a (64-bit). Used for cache keys and dataset fingerprints.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
        return *this;
    }

    Fnv1a64& update(std::string_view s) { return update(s.data(), s.size()); }

    template <typename T>
    Fnv1a64& update_pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        return update(&v, sizeof(v));
    }

    std::uint64_t digest() const { return state_; }

    std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace reco
