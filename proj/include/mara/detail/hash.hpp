#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace mara::detail {

// 64-bit FNV-1a. Used for content hashing (mock embedder seeds) and
// transcript digests. Stable across platforms by construction.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ULL) {
    uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// splitmix64: tiny deterministic PRNG, identical output on every platform.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // uniform in [-1, 1)
    double next_signed_unit() {
        return static_cast<double>(next() >> 11) * (1.0 / 4503599627370496.0) * 2.0 - 1.0;
    }
    // uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
    }
    // uniform in [lo, hi]
    uint64_t next_range(uint64_t lo, uint64_t hi) {
        return lo + next() % (hi - lo + 1);
    }
};

// CRC-32 (IEEE, reflected, poly 0xEDB88320), the checksum used by the
// index file trailer.
class Crc32 {
public:
    Crc32() : crc_(0xffffffffu) {}

    void update(const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        uint32_t c = crc_;
        for (size_t i = 0; i < len; ++i) {
            c = table()[(c ^ p[i]) & 0xffu] ^ (c >> 8);
        }
        crc_ = c;
    }

    uint32_t value() const { return crc_ ^ 0xffffffffu; }

    static uint32_t of(const void* data, size_t len) {
        Crc32 c;
        c.update(data, len);
        return c.value();
    }

private:
    static const std::array<uint32_t, 256>& table() {
        static const std::array<uint32_t, 256> t = [] {
            std::array<uint32_t, 256> out{};
            for (uint32_t i = 0; i < 256; ++i) {
                uint32_t c = i;
                for (int j = 0; j < 8; ++j) {
                    c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
                }
                out[i] = c;
            }
            return out;
        }();
        return t;
    }

    uint32_t crc_;
};

}  // namespace mara::detail
