#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

#include "mara/errors.hpp"

namespace mara::detail {

// Little-endian encode/decode helpers for the index file format. Encoding
// is explicit byte shuffling so files are identical on any host.

inline void put_u32le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64le(std::string& out, uint64_t v) {
    put_u32le(out, static_cast<uint32_t>(v & 0xffffffffu));
    put_u32le(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32le(std::string& out, float f) {
    put_u32le(out, std::bit_cast<uint32_t>(f));
}

// Cursor over an in-memory buffer; every read is bounds-checked and a
// short buffer raises Truncated.
class ByteReader {
public:
    ByteReader(const std::string& buf, size_t pos = 0) : buf_(buf), pos_(pos) {}

    uint32_t u32le() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
        pos_ += 4;
        return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    }

    uint64_t u64le() {
        uint64_t lo = u32le();
        uint64_t hi = u32le();
        return lo | (hi << 32);
    }

    float f32le() { return std::bit_cast<float>(u32le()); }

    std::string bytes(size_t n) {
        need(n);
        std::string out = buf_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    size_t pos() const { return pos_; }
    size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > buf_.size()) {
            throw Truncated("index file truncated at byte " + std::to_string(pos_));
        }
    }

    const std::string& buf_;
    size_t pos_;
};

}  // namespace mara::detail
