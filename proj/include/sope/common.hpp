#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sope {

using Coord = std::int64_t;
using PointId = std::uint64_t;
using Encoding = std::uint64_t;

using i128 = __int128;
using u128 = unsigned __int128;

inline constexpr std::size_t kPageSize = 4096;
inline constexpr std::size_t kCiphertextSize = 16;

// All-ones encoding is reserved as the +inf sentinel on the wire and in
// encoded rectangles; real encodings are capped well below it.
inline constexpr Encoding kEncodingInfinity = ~Encoding{0};
inline constexpr unsigned kMaxEncodingBits = 58;

// Coordinates are validated against this bound at ingestion so that squared
// distances and dominance products stay exact in 128-bit arithmetic.
inline constexpr Coord kMaxCoordMagnitude = Coord{1} << 60;

inline constexpr std::uint32_t kMaxDimensions = 32;

enum class Errc {
    protocol,
    bad_param,
    dimension_mismatch,
    duplicate,
    not_found,
    unsupported,
    corruption,
    crypto,
    io,
    encoding_overflow,
    depth_exceeded,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace sope
