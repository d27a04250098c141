#pragma once

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "sope/protocol.hpp"
#include "sope/query_engine.hpp"
#include "sope/store.hpp"
#include "sope/transport.hpp"

namespace sope {

// Server half of the interactive protocol. Executes descents by shipping raw
// ciphertext lists and applying the client's child/position choices; never
// compares or decrypts anything. Insert sessions stage every axis's leaf
// position first and mutate only afterwards, so a session abort leaves the
// trees untouched.
class Server {
public:
    explicit Server(Store& store) : store_(store) {}

    void handle_connection(ByteStream& stream) {
        for (;;) {
            std::optional<Message> msg;
            try {
                msg = read_message(stream);
            } catch (const Error&) {
                return;
            }
            if (!msg) return;
            try {
                dispatch(stream, *msg);
            } catch (const Error& e) {
                try {
                    send_error(stream, to_code(e.code()), e.what());
                    stream.close();
                } catch (...) {
                }
                return;
            } catch (const std::exception& e) {
                try {
                    send_error(stream, ErrorCode::internal, e.what());
                    stream.close();
                } catch (...) {
                }
                return;
            }
        }
    }

    void serve(TcpListener& listener, std::atomic<bool>* stop = nullptr) {
        while (!stop || !stop->load()) {
            auto conn = listener.accept();
            if (!conn) return;
            std::thread([this, c = std::shared_ptr<TcpStream>(std::move(conn))] {
                handle_connection(*c);
            }).detach();
        }
    }

private:
    struct StagedAxis {
        DescentPath path;
        std::uint16_t pos = 0;
        LeafMode mode = LeafMode::present;
        Ciphertext cipher;
    };

    void dispatch(ByteStream& stream, const Message& msg) {
        switch (msg.kind) {
            case MsgKind::begin_insert:
                return insert_session(stream, msg);
            case MsgKind::begin_point_query:
                return point_query_session(stream, msg);
            case MsgKind::begin_range_query:
                return range_query_session(stream, msg);
            case MsgKind::begin_skyline:
                return skyline_session(stream, msg);
            case MsgKind::begin_global_skyline:
                return global_skyline_session(stream, msg);
            case MsgKind::begin_constrained:
                return constrained_session(stream, msg);
            case MsgKind::stats_request:
                return stats_session(stream);
            default:
                fail(Errc::protocol, "unexpected message kind outside a session");
        }
    }

    // --- sessions ---

    void insert_session(ByteStream& stream, const Message& begin) {
        PayloadReader r(begin.payload);
        PointId id = r.u64();
        std::uint32_t d = r.u32();
        r.done();
        require(d == store_.dims(), Errc::bad_param, "dimension mismatch");

        std::unique_lock lock(store_.session_mutex());
        require(!store_.rtree().contains_id(id), Errc::duplicate, "point id already present");

        std::vector<StagedAxis> staged(d);
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            auto s = run_descent(stream, axis, true);
            require(s.has_value(), Errc::protocol, "NOT_FOUND during insertion");
            staged[axis] = std::move(*s);
        }

        for (std::uint32_t axis = 0; axis < d; ++axis)
            if (staged[axis].mode == LeafMode::insert_new)
                require(store_.axis_tree(axis).can_grow(), Errc::encoding_overflow,
                        "axis tree too deep for the encoding width");

        std::vector<Encoding> encs(d);
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            BPlusTree& tree = store_.axis_tree(axis);
            const StagedAxis& s = staged[axis];
            if (s.mode == LeafMode::present) {
                encs[axis] = tree.encoding_at(s.path, s.pos);
            } else {
                auto result = tree.insert_at(s.path, s.pos, s.cipher);
                store_.rtree().axis_range_update(axis, result.range);
                encs[axis] = result.encoding;
            }
        }
        store_.rtree().insert_point({id, encs});

        for (std::uint32_t axis = 0; axis < d; ++axis)
            send(stream, MsgKind::encoding, PayloadWriter().u64(encs[axis]).take());
        send_bool(stream, true);
    }

    void point_query_session(ByteStream& stream, const Message& begin) {
        PayloadReader r(begin.payload);
        std::uint32_t d = r.u32();
        r.done();
        require(d == store_.dims(), Errc::bad_param, "dimension mismatch");

        std::shared_lock lock(store_.session_mutex());
        std::vector<Encoding> encs(d);
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            auto outcome = run_query_descent(stream, axis);
            if (!outcome) {  // coordinate absent on this axis: finished early
                send_bool(stream, false);
                return;
            }
            auto [path, pos, present] = *outcome;
            if (!present) {
                send_bool(stream, false);
                return;
            }
            encs[axis] = store_.axis_tree(axis).encoding_at(path, pos);
        }
        auto ids = store_.rtree().point_search(encs);
        send_bool(stream, !ids.empty());
    }

    void range_query_session(ByteStream& stream, const Message& begin) {
        PayloadReader r(begin.payload);
        std::uint32_t d = r.u32();
        r.done();
        require(d == store_.dims(), Errc::bad_param, "dimension mismatch");

        std::shared_lock lock(store_.session_mutex());
        auto box = read_virtual_box(stream, d);
        std::vector<EncodedPoint> hits;
        if (box) hits = store_.rtree().range_search(*box);
        send_result_set(stream, hits);
    }

    void skyline_session(ByteStream& stream, const Message& begin) {
        require(begin.payload.empty(), Errc::protocol, "unexpected payload");
        std::shared_lock lock(store_.session_mutex());
        send_result_set(stream, query::skyline(store_.rtree()));
    }

    void global_skyline_session(ByteStream& stream, const Message& begin) {
        PayloadReader r(begin.payload);
        std::uint32_t k = r.u32();
        std::uint32_t d = r.u32();
        r.done();
        require(k >= 1, Errc::bad_param, "k must be >= 1");
        require(d == store_.dims(), Errc::bad_param, "dimension mismatch");

        std::shared_lock lock(store_.session_mutex());
        std::vector<std::int64_t> q2 = read_doubled_query_point(stream, d);
        auto layers = query::k_global_skyline(store_.rtree(), q2, k);
        std::vector<EncodedPoint> flat;
        for (auto& layer : layers)
            flat.insert(flat.end(), layer.begin(), layer.end());
        send_result_set(stream, flat);
    }

    void constrained_session(ByteStream& stream, const Message& begin) {
        PayloadReader r(begin.payload);
        std::uint32_t k = r.u32();
        bool has_q = r.u8() != 0;
        std::uint32_t d = r.u32();
        r.done();
        require(d == store_.dims(), Errc::bad_param, "dimension mismatch");
        require(has_q ? k >= 1 : k == 0, Errc::bad_param,
                "k must be >= 1 with a query point and 0 without");

        std::shared_lock lock(store_.session_mutex());
        auto box = read_virtual_box(stream, d);
        if (has_q) {
            std::vector<std::int64_t> q2 = read_doubled_query_point(stream, d);
            std::vector<EncodedPoint> flat;
            if (box) {
                auto layers =
                    query::constrained_k_global_skyline(store_.rtree(), *box, q2, k);
                for (auto& layer : layers)
                    flat.insert(flat.end(), layer.begin(), layer.end());
            }
            send_result_set(stream, flat);
        } else {
            std::vector<EncodedPoint> pts;
            if (box) pts = query::constrained_skyline(store_.rtree(), *box);
            send_result_set(stream, pts);
        }
    }

    void stats_session(ByteStream& stream) {
        std::shared_lock lock(store_.session_mutex());
        send(stream, MsgKind::stats_text, PayloadWriter().text(store_.metrics_text()).take());
    }

    // --- descent plumbing ---

    /// Interactive root-to-leaf walk: ships each node's ciphertexts, applies
    /// the client's CHOOSE_CHILD replies, returns the client's leaf reply.
    /// nullopt when the client reported NOT_FOUND (query descents only).
    std::optional<StagedAxis> run_descent(ByteStream& stream, std::uint32_t axis,
                                          bool inserting) {
        BPlusTree& tree = store_.axis_tree(axis);
        StagedAxis out;
        out.path.pages.push_back(tree.root_page());
        for (;;) {
            BPlusTree::Node node = tree.read_node(out.path.pages.back());
            send_node(stream, node);
            if (node.leaf) {
                Message reply = expect_leaf_reply(stream);
                if (reply.kind == MsgKind::not_found) {
                    require(!inserting, Errc::protocol, "NOT_FOUND during insertion");
                    return std::nullopt;
                }
                PayloadReader r(reply.payload);
                out.pos = r.u16();
                out.mode = static_cast<LeafMode>(r.u8());
                switch (out.mode) {
                    case LeafMode::insert_new:
                        require(inserting, Errc::protocol, "insertion outside insert session");
                        out.cipher = r.ciphertext();
                        require(out.pos <= node.keys.size(), Errc::protocol,
                                "leaf position out of range");
                        break;
                    case LeafMode::present:
                        require(out.pos < node.keys.size(), Errc::protocol,
                                "leaf position out of range");
                        break;
                    case LeafMode::absent:
                        require(!inserting, Errc::protocol, "absent mark during insertion");
                        require(out.pos <= node.keys.size(), Errc::protocol,
                                "leaf position out of range");
                        break;
                    default:
                        fail(Errc::protocol, "bad leaf mode");
                }
                r.done();
                return out;
            }
            Message choice = expect(stream, MsgKind::choose_child);
            PayloadReader r(choice.payload);
            std::uint16_t idx = r.u16();
            r.done();
            std::uint64_t child = tree.child_of(node, idx);
            out.path.steps.push_back(idx);
            out.path.pages.push_back(child);
        }
    }

    /// Query-flavoured descent; nullopt when the client reported NOT_FOUND.
    std::optional<std::tuple<DescentPath, std::uint16_t, bool>> run_query_descent(
        ByteStream& stream, std::uint32_t axis) {
        auto s = run_descent(stream, axis, false);
        if (!s) return std::nullopt;
        return std::make_tuple(s->path, s->pos, s->mode == LeafMode::present);
    }

    /// Two corner descents with gap rounding; nullopt when the box is
    /// provably empty. Corners are never materialized in the trees.
    std::optional<EncodedRect> read_virtual_box(ByteStream& stream, std::uint32_t d) {
        EncodedRect box;
        box.lo.resize(d);
        box.hi.resize(d);
        bool empty = false;
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            auto outcome = run_query_descent(stream, axis);
            require(outcome.has_value(), Errc::protocol, "NOT_FOUND in corner descent");
            auto [path, pos, present] = *outcome;
            box.lo[axis] = store_.axis_tree(axis).virtual_lower(path, pos, present);
        }
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            auto outcome = run_query_descent(stream, axis);
            require(outcome.has_value(), Errc::protocol, "NOT_FOUND in corner descent");
            auto [path, pos, present] = *outcome;
            auto hi = store_.axis_tree(axis).virtual_upper(path, pos, present);
            if (!hi) {
                empty = true;
                continue;
            }
            box.hi[axis] = *hi;
            if (box.lo[axis] > box.hi[axis]) empty = true;
        }
        if (empty) return std::nullopt;
        return box;
    }

    std::vector<std::int64_t> read_doubled_query_point(ByteStream& stream, std::uint32_t d) {
        std::vector<std::int64_t> q2(d);
        for (std::uint32_t axis = 0; axis < d; ++axis) {
            auto outcome = run_query_descent(stream, axis);
            require(outcome.has_value(), Errc::protocol, "NOT_FOUND in query-point descent");
            auto [path, pos, present] = *outcome;
            q2[axis] = store_.axis_tree(axis).virtual_doubled(path, pos, present);
        }
        return q2;
    }

    // --- message helpers ---

    void send(ByteStream& stream, MsgKind kind, std::vector<std::uint8_t> payload = {}) {
        write_message(stream, Message{kind, std::move(payload)});
    }

    void send_node(ByteStream& stream, const BPlusTree::Node& node) {
        PayloadWriter w;
        w.u8(node.leaf ? 0 : 1);
        w.u16(static_cast<std::uint16_t>(node.keys.size()));
        for (const auto& k : node.keys) w.ciphertext(k);
        send(stream, MsgKind::node, w.take());
    }

    void send_bool(ByteStream& stream, bool v) {
        send(stream, MsgKind::bool_result, PayloadWriter().u8(v ? 1 : 0).take());
    }

    void send_error(ByteStream& stream, ErrorCode code, const std::string& what) {
        send(stream, MsgKind::error,
             PayloadWriter().u32(static_cast<std::uint32_t>(code)).text(what).take());
    }

    /// Resolves result ciphertexts by walking each axis B+-tree per point.
    void send_result_set(ByteStream& stream, const std::vector<EncodedPoint>& pts) {
        PayloadWriter w;
        w.u32(static_cast<std::uint32_t>(pts.size()));
        for (const auto& p : pts) {
            w.u64(p.id);
            for (std::uint32_t axis = 0; axis < store_.dims(); ++axis)
                w.ciphertext(store_.axis_tree(axis).lookup_ciphertext(p.encs[axis]));
        }
        send(stream, MsgKind::result_set, w.take());
    }

    Message expect(ByteStream& stream, MsgKind kind) {
        auto msg = read_message(stream);
        require(msg.has_value(), Errc::protocol, "connection closed mid-session");
        require(msg->kind == kind, Errc::protocol, "unexpected message kind in session");
        return std::move(*msg);
    }

    Message expect_leaf_reply(ByteStream& stream) {
        auto msg = read_message(stream);
        require(msg.has_value(), Errc::protocol, "connection closed mid-session");
        require(msg->kind == MsgKind::leaf_position || msg->kind == MsgKind::not_found,
                Errc::protocol, "unexpected message kind at leaf");
        return std::move(*msg);
    }

    static ErrorCode to_code(Errc c) {
        switch (c) {
            case Errc::protocol:
                return ErrorCode::protocol;
            case Errc::bad_param:
            case Errc::dimension_mismatch:
            case Errc::encoding_overflow:
                return ErrorCode::bad_param;
            case Errc::duplicate:
                return ErrorCode::duplicate;
            case Errc::unsupported:
                return ErrorCode::unsupported;
            case Errc::corruption:
                return ErrorCode::corruption;
            default:
                return ErrorCode::internal;
        }
    }

    Store& store_;
};

}  // namespace sope
