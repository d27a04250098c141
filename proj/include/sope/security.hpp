#pragma once

#include <map>
#include <thread>
#include <vector>

#include "sope/client.hpp"
#include "sope/server.hpp"
#include "sope/store.hpp"
#include "sope/transport.hpp"

// Executable rendition of the indistinguishability game at the structural
// level: two insertion sequences with the same spatial order relation must
// produce byte-identical server-observable traces when the cipher is replaced
// by the positional stub.

namespace sope::security {

// Per-axis rank pattern: for each element, the number of strictly smaller
// distinct prior values and whether the value was seen before.
using OrderPattern = std::vector<std::vector<std::pair<std::size_t, bool>>>;

inline OrderPattern order_pattern(std::span<const Point> seq, std::uint32_t d) {
    OrderPattern pattern(d);
    std::vector<std::set<Coord>> seen(d);
    for (const Point& p : seq) {
        require(p.coords.size() == d, Errc::dimension_mismatch, "point arity");
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            Coord v = p.coords[axis];
            auto& s = seen[axis];
            std::size_t rank = std::distance(s.begin(), s.lower_bound(v));
            bool repeat = s.count(v) != 0;
            pattern[axis].emplace_back(rank, repeat);
            s.insert(v);
        }
    }
    return pattern;
}

struct Transcript {
    std::vector<std::uint8_t> bytes;

    void tag(char t) { bytes.push_back(static_cast<std::uint8_t>(t)); }
    void append(std::span<const std::uint8_t> data) {
        bytes.insert(bytes.end(), data.begin(), data.end());
    }
    void append_u64(std::uint64_t v) {
        for (int i = 7; i >= 0; --i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void append_str(const std::string& s) {
        append_u64(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }

    friend bool operator==(const Transcript& a, const Transcript& b) {
        return a.bytes == b.bytes;
    }
};

namespace detail {

// Mirrors every byte crossing the server's endpoint into the transcript.
class RecordingStream final : public ByteStream {
public:
    RecordingStream(ByteStream& inner, Transcript& t) : inner_(inner), t_(t) {}

    void send(std::span<const std::uint8_t> data) override {
        t_.tag('>');
        t_.append_u64(data.size());
        t_.append(data);
        inner_.send(data);
    }

    bool recv_exact(std::span<std::uint8_t> out) override {
        if (!inner_.recv_exact(out)) return false;
        t_.tag('<');
        t_.append_u64(out.size());
        t_.append(out);
        return true;
    }

    void close() override { inner_.close(); }

private:
    ByteStream& inner_;
    Transcript& t_;
};

inline std::uint64_t fnv1a(std::span<const std::uint8_t> data, std::uint64_t h) {
    for (std::uint8_t b : data) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline constexpr std::uint64_t kGameBranching = 4;

/// Inserts the sequence into a fresh in-memory store through the full
/// interactive protocol under the positional stub cipher, recording message
/// bytes, page accesses and per-session tree-shape digests. Ids are assigned
/// positionally so both game sequences are structurally comparable.
inline Transcript run_game_side(const std::vector<Point>& seq, std::uint32_t d) {
    Transcript t;
    auto store = Store::create_memory({d, kGameBranching});
    store->set_page_hook([&t](const std::string& tree, std::uint64_t page, char op) {
        t.tag('P');
        t.append_str(tree);
        t.append_u64(page);
        t.tag(op);
    });

    auto [client_end, server_end] = LoopbackChannel::make();
    detail::RecordingStream recorded(*server_end, t);
    Server server(*store);
    std::thread server_thread([&] { server.handle_connection(recorded); });

    {
        StubPositionalCipher stub;
        Client client(*client_end, stub, d);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            Point p = seq[i];
            p.id = i + 1;
            client.insert(p);
            // session boundary: digest every tree's pages
            store->set_page_hook(nullptr);
            t.tag('S');
            std::uint64_t h = 1469598103934665603ull;
            std::uint8_t buf[kPageSize];
            for (std::uint32_t axis = 0; axis < d; ++axis) {
                auto& ps = store->axis_tree(axis).store();
                for (std::uint64_t pg = 0; pg < ps.page_count(); ++pg) {
                    ps.read_page(pg, buf);
                    h = detail::fnv1a(buf, h);
                }
            }
            auto& rs = store->rtree().store();
            for (std::uint64_t pg = 0; pg < rs.page_count(); ++pg) {
                rs.read_page(pg, buf);
                h = detail::fnv1a(buf, h);
            }
            t.append_u64(h);
            store->set_page_hook([&t](const std::string& tree, std::uint64_t page, char op) {
                t.tag('P');
                t.append_str(tree);
                t.append_u64(page);
                t.tag(op);
            });
        }
    }
    client_end->close();
    server_thread.join();
    return t;
}

struct GameVerdict {
    bool identical = false;
    Transcript t0, t1;
};

/// The structural game: precondition order_pattern(seq0) == order_pattern(seq1),
/// then transcript equality is asserted byte for byte.
inline GameVerdict play_game(const std::vector<Point>& seq0, const std::vector<Point>& seq1,
                             std::uint32_t d) {
    require(seq0.size() == seq1.size(), Errc::bad_param, "sequence lengths differ");
    require(order_pattern(seq0, d) == order_pattern(seq1, d), Errc::bad_param,
            "sequences are not order-isomorphic");
    GameVerdict v;
    v.t0 = run_game_side(seq0, d);
    v.t1 = run_game_side(seq1, d);
    v.identical = v.t0 == v.t1;
    return v;
}

}  // namespace sope::security
