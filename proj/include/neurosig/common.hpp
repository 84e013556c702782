#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace neurosig {

// Error taxonomy maps onto CLI exit codes: validation -> 2, numerical -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// FNV-1a, used for config/artifact provenance hashes and header checksums.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint32_t fnv1a32(std::string_view bytes) {
    std::uint32_t h = 0x811c9dc5u;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x01000193u;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

} // namespace neurosig
