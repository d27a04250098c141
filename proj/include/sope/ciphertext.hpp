#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>

#include "sope/common.hpp"

// The server-safe half of the cipher boundary: an opaque 16-byte block. The
// server stores, ships and compares these for identity only; inverting them
// requires sope/cipher.hpp, which server code does not include.

namespace sope {

struct Ciphertext {
    std::array<std::uint8_t, kCiphertextSize> bytes{};

    friend bool operator==(const Ciphertext& a, const Ciphertext& b) { return a.bytes == b.bytes; }
    friend bool operator!=(const Ciphertext& a, const Ciphertext& b) { return !(a == b); }
};

struct CiphertextHash {
    std::size_t operator()(const Ciphertext& c) const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto b : c.bytes) {
            h ^= b;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

}  // namespace sope
