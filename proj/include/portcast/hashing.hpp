#pragma once

#include <cstdint>
#include <string>

namespace portcast::run {

// FNV-1a 64-bit content hash, hex encoded. Integrity fingerprinting only.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

std::string file_hash(const std::string& path);

}  // namespace portcast::run
