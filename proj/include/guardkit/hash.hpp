#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace guardkit {

// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Hash of several fields. Fields are joined with a 0x1f separator so that
// ("ab","c") and ("a","bc") hash differently.
inline std::uint64_t content_hash(std::initializer_list<std::string_view> fields) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& f : fields) {
        h = fnv1a64(f, h);
        h ^= 0x1f;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace guardkit
