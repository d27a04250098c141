#pragma once

#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sope/ciphertext.hpp"
#include "sope/common.hpp"
#include "sope/page_store.hpp"

namespace sope {

// Frame: 4-byte big-endian payload length (excluding this 5-byte header),
// 1-byte message kind, payload. All integers big-endian; encodings are
// unsigned 64-bit with all-ones as the +inf sentinel.
enum class MsgKind : std::uint8_t {
    begin_insert = 1,
    node = 2,
    choose_child = 3,
    leaf_position = 4,
    encoding = 5,
    begin_point_query = 6,
    begin_range_query = 7,
    begin_skyline = 8,
    begin_global_skyline = 9,
    begin_constrained = 10,
    result_set = 11,
    bool_result = 12,
    not_found = 13,
    error = 14,
    stats_request = 15,
    stats_text = 16,
};

enum class LeafMode : std::uint8_t {
    insert_new = 0,   // followed by the 16-byte ciphertext of the new key
    present = 1,      // coordinate already stored at this position
    absent = 2,       // would-be position for a non-materialized query value
};

enum class ErrorCode : std::uint32_t {
    protocol = 1,
    bad_param = 2,
    duplicate = 3,
    unsupported = 4,
    corruption = 5,
    internal = 6,
};

struct Message {
    MsgKind kind{};
    std::vector<std::uint8_t> payload;
};

class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual void send(std::span<const std::uint8_t> data) = 0;
    /// Fills the whole span; returns false on clean EOF before the first byte.
    virtual bool recv_exact(std::span<std::uint8_t> data) = 0;
    virtual void close() = 0;
};

inline constexpr std::size_t kMaxPayload = 1 << 26;

inline void write_message(ByteStream& s, const Message& m) {
    std::vector<std::uint8_t> frame(5 + m.payload.size());
    wire::put_u32(frame.data(), static_cast<std::uint32_t>(m.payload.size()));
    frame[4] = static_cast<std::uint8_t>(m.kind);
    std::copy(m.payload.begin(), m.payload.end(), frame.begin() + 5);
    s.send(frame);
}

inline std::optional<Message> read_message(ByteStream& s) {
    std::uint8_t header[5];
    if (!s.recv_exact(header)) return std::nullopt;
    std::uint32_t len = wire::get_u32(header);
    require(len <= kMaxPayload, Errc::protocol, "oversized frame");
    Message m;
    m.kind = static_cast<MsgKind>(header[4]);
    m.payload.resize(len);
    if (len > 0)
        require(s.recv_exact(m.payload), Errc::protocol, "truncated frame");
    return m;
}

class PayloadWriter {
public:
    PayloadWriter& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }
    PayloadWriter& u16(std::uint16_t v) {
        std::size_t at = buf_.size();
        buf_.resize(at + 2);
        wire::put_u16(buf_.data() + at, v);
        return *this;
    }
    PayloadWriter& u32(std::uint32_t v) {
        std::size_t at = buf_.size();
        buf_.resize(at + 4);
        wire::put_u32(buf_.data() + at, v);
        return *this;
    }
    PayloadWriter& u64(std::uint64_t v) {
        std::size_t at = buf_.size();
        buf_.resize(at + 8);
        wire::put_u64(buf_.data() + at, v);
        return *this;
    }
    PayloadWriter& ciphertext(const Ciphertext& c) {
        buf_.insert(buf_.end(), c.bytes.begin(), c.bytes.end());
        return *this;
    }
    PayloadWriter& text(const std::string& t) {
        u32(static_cast<std::uint32_t>(t.size()));
        buf_.insert(buf_.end(), t.begin(), t.end());
        return *this;
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class PayloadReader {
public:
    explicit PayloadReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return data_[need(1)]; }
    std::uint16_t u16() { return wire::get_u16(&data_[need(2)]); }
    std::uint32_t u32() { return wire::get_u32(&data_[need(4)]); }
    std::uint64_t u64() { return wire::get_u64(&data_[need(8)]); }
    Ciphertext ciphertext() {
        Ciphertext c;
        std::size_t at = need(kCiphertextSize);
        std::copy(data_.begin() + at, data_.begin() + at + kCiphertextSize, c.bytes.begin());
        return c;
    }
    std::string text() {
        std::uint32_t n = u32();
        std::size_t at = need(n);
        return std::string(data_.begin() + at, data_.begin() + at + n);
    }
    void done() const { require(off_ == data_.size(), Errc::protocol, "trailing payload bytes"); }

private:
    std::size_t need(std::size_t n) {
        require(off_ + n <= data_.size(), Errc::protocol, "short payload");
        std::size_t at = off_;
        off_ += n;
        return at;
    }

    std::span<const std::uint8_t> data_;
    std::size_t off_ = 0;
};

}  // namespace sope
