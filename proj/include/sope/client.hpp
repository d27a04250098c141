#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "sope/cipher.hpp"
#include "sope/geometry.hpp"
#include "sope/protocol.hpp"

namespace sope {

struct NNResultSegment {
    PointId nn = 0;
    double t0 = 0;
    double t1 = 0;
};

class ContinuousDepthError : public Error {
public:
    ContinuousDepthError(std::vector<NNResultSegment> partial)
        : Error(Errc::depth_exceeded, "continuous-NN split recursion exceeded depth cap"),
          partial_tiling(std::move(partial)) {}

    std::vector<NNResultSegment> partial_tiling;
};

// The key holder. Drives interactive descents (all plaintext comparisons and
// decryptions happen here), and runs the client-side refinement phases of the
// dynamic-skyline, kNN, reverse-kNN and continuous-NN queries. Transmits only
// child choices, leaf positions, ciphertexts and encoded-space parameters.
class Client {
public:
    struct Options {
        // kNN ties at the k-th distance: default strict k with smaller-id
        // preference; set to true to return every tie at the k-th place.
        bool include_kth_ties = false;
        std::size_t continuous_depth_cap = 64;
    };

    Client(ByteStream& stream, const Cipher& cipher, std::uint32_t d)
        : stream_(stream), cipher_(cipher), d_(d) {}

    Client(ByteStream& stream, const Cipher& cipher, std::uint32_t d, Options opts)
        : stream_(stream), cipher_(cipher), d_(d), opts_(opts) {}

    std::uint32_t dims() const { return d_; }

    std::vector<Encoding> insert(const Point& p) {
        require(p.coords.size() == d_, Errc::dimension_mismatch, "point arity");
        for (Coord c : p.coords)
            require(c > -kMaxCoordMagnitude && c < kMaxCoordMagnitude, Errc::bad_param,
                    "coordinate magnitude out of supported range");
        send(MsgKind::begin_insert, PayloadWriter().u64(p.id).u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_insert(axis, p.coords[axis]);
        std::vector<Encoding> encs(d_);
        for (std::uint32_t axis = 0; axis < d_; ++axis) {
            Message m = expect(MsgKind::encoding);
            PayloadReader r(m.payload);
            encs[axis] = r.u64();
            r.done();
        }
        expect_bool(true);
        return encs;
    }

    bool point_query(std::span<const Coord> q) {
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        send(MsgKind::begin_point_query, PayloadWriter().u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis) {
            bool found = descend_point_query(axis, q[axis]);
            if (!found) return read_bool();  // server already answered FALSE
        }
        return read_bool();
    }

    std::vector<Point> range_query(const Rect& box) {
        check_box(box);
        send(MsgKind::begin_range_query, PayloadWriter().u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.lo[axis]));
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.hi[axis]));
        return read_result_set();
    }

    std::vector<Point> skyline() {
        send(MsgKind::begin_skyline, {});
        return read_result_set();
    }

    std::vector<Point> constrained_skyline(const Rect& box) {
        check_box(box);
        send(MsgKind::begin_constrained, PayloadWriter().u32(0).u8(0).u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.lo[axis]));
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.hi[axis]));
        return read_result_set();
    }

    /// Decrypted k-global-skyline candidate set (union of the k layers).
    std::vector<Point> global_skyline_candidates(std::span<const Coord> q, std::uint32_t k) {
        std::vector<Target> targets;
        for (Coord c : q) targets.push_back(Target::exact(c));
        return fetch_gsl(targets, k);
    }

    std::vector<std::pair<Point, u128>> knn(std::span<const Coord> q, std::uint32_t k) {
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        require(k >= 1, Errc::bad_param, "k must be >= 1");
        auto cands = global_skyline_candidates(q, k);
        return refine_knn(cands, q, k);
    }

    std::vector<std::pair<Point, u128>> constrained_knn(const Rect& box,
                                                        std::span<const Coord> q,
                                                        std::uint32_t k) {
        check_box(box);
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        require(k >= 1, Errc::bad_param, "k must be >= 1");
        send(MsgKind::begin_constrained, PayloadWriter().u32(k).u8(1).u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.lo[axis]));
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(box.hi[axis]));
        for (std::uint32_t axis = 0; axis < d_; ++axis)
            descend_virtual(axis, Target::exact(q[axis]));
        auto cands = read_result_set();
        return refine_knn(cands, q, k);
    }

    std::vector<Point> dynamic_skyline(std::span<const Coord> q) {
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        auto cands = global_skyline_candidates(q, 1);
        std::vector<Point> out;
        for (const Point& p : cands) {
            bool dominated = false;
            for (const Point& r : cands) {
                if (r.id == p.id) continue;
                if (dynamically_dominates(r.coords, p.coords, q)) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) out.push_back(p);
        }
        return out;
    }

    std::vector<Point> reverse_knn(std::span<const Coord> q, std::uint32_t k) {
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        require(k >= 1, Errc::bad_param, "k must be >= 1");
        auto rs = global_skyline_candidates(q, k);
        if (rs.empty()) return {};

        bool q_in_dataset = false;
        for (const Point& p : rs)
            if (std::equal(q.begin(), q.end(), p.coords.begin())) q_in_dataset = true;

        // local reverse-kNN among the candidates to prune; skipped when q is a
        // stored point so the follow-up queries leak nothing about distances
        std::vector<Point> cs;
        if (q_in_dataset) {
            cs = rs;
        } else {
            for (const Point& p : rs) {
                std::uint32_t closer = 0;
                u128 dq = distance_sq(p.coords, q);
                for (const Point& r : rs) {
                    if (r.id == p.id) continue;
                    if (distance_sq(p.coords, r.coords) < dq) ++closer;
                }
                if (closer < k) cs.push_back(p);
            }
        }

        std::vector<Point> out;
        for (const Point& p : cs) {
            // kNN(p, k) not considering p itself: request k+1, drop p
            auto nns = knn(p.coords, k + 1);
            std::erase_if(nns, [&](const auto& pr) { return pr.first.id == p.id; });
            if (nns.size() > k) nns.resize(k);
            u128 dq = distance_sq(p.coords, q);
            if (nns.size() < k || dq <= nns.back().second) out.push_back(p);
        }
        std::sort(out.begin(), out.end(), [](const Point& a, const Point& b) { return a.id < b.id; });
        return out;
    }

    std::vector<NNResultSegment> continuous_1nn(const Segment& seg) {
        require(seg.a.size() == d_ && seg.b.size() == d_, Errc::dimension_mismatch,
                "segment arity");
        require(seg.a != seg.b, Errc::bad_param, "degenerate segment");

        auto set0 = nn_at(seg, 0.0);
        if (set0.empty()) return {};  // empty store
        auto set1 = nn_at(seg, 1.0);

        std::vector<NNResultSegment> tiles;
        split_rec(seg, 0.0, 1.0, set0, set1, 0, tiles);

        std::vector<NNResultSegment> merged;
        for (const auto& t : tiles) {
            if (!merged.empty() && merged.back().nn == t.nn)
                merged.back().t1 = t.t1;
            else
                merged.push_back(t);
        }
        return merged;
    }

    std::string stats_text() {
        send(MsgKind::stats_request, {});
        Message m = expect(MsgKind::stats_text);
        PayloadReader r(m.payload);
        std::string text = r.text();
        r.done();
        return text;
    }

private:
    void check_box(const Rect& box) const {
        require(box.lo.size() == d_ && box.hi.size() == d_, Errc::dimension_mismatch,
                "box arity");
        for (std::uint32_t i = 0; i < d_; ++i)
            require(box.lo[i] <= box.hi[i], Errc::bad_param, "box corners not normalized");
    }

    // A descent target: exact 64-bit integers for stored coordinates,
    // real-valued for continuous-NN sample points.
    struct Target {
        bool is_exact = true;
        Coord iv = 0;
        double rv = 0;

        static Target exact(Coord v) { return {true, v, static_cast<double>(v)}; }
        static Target real(double v) {
            if (std::floor(v) == v && std::abs(v) < 9.0e15)
                return exact(static_cast<Coord>(v));
            return {false, 0, v};
        }

        bool le(Coord key) const {
            return is_exact ? iv <= key : rv <= static_cast<double>(key);
        }
        bool eq(Coord key) const { return is_exact && iv == key; }
        bool lt(Coord key) const {
            return is_exact ? iv < key : rv < static_cast<double>(key);
        }
    };

    struct LeafView {
        std::vector<Coord> keys;
        std::size_t lower_bound = 0;  // first position with key >= target
        std::optional<std::size_t> equal_pos;
    };

    /// Core descent: decrypt each received node, choose the child whose
    /// separator first covers the target, stop at the leaf.
    LeafView descend(std::uint32_t axis, const Target& t) {
        for (;;) {
            Message m = expect(MsgKind::node);
            PayloadReader r(m.payload);
            bool leaf = r.u8() == 0;
            std::uint16_t count = r.u16();
            std::vector<Coord> plain(count);
            for (auto& v : plain) v = cipher_.decrypt(r.ciphertext(), axis);
            r.done();

            if (leaf) {
                LeafView view;
                view.keys = std::move(plain);
                std::size_t pos = 0;
                while (pos < view.keys.size() && !t.le(view.keys[pos])) ++pos;
                view.lower_bound = pos;
                if (pos < view.keys.size() && t.eq(view.keys[pos])) view.equal_pos = pos;
                return view;
            }
            // separators are maxima of left subtrees: first separator >= target
            std::uint16_t child = count;
            for (std::uint16_t j = 0; j < count; ++j)
                if (t.le(plain[j])) {
                    child = j;
                    break;
                }
            send(MsgKind::choose_child, PayloadWriter().u16(child).take());
        }
    }

    void descend_insert(std::uint32_t axis, Coord value) {
        Target t = Target::exact(value);
        LeafView view = descend(axis, t);
        PayloadWriter w;
        if (view.equal_pos) {
            w.u16(static_cast<std::uint16_t>(*view.equal_pos));
            w.u8(static_cast<std::uint8_t>(LeafMode::present));
        } else {
            w.u16(static_cast<std::uint16_t>(view.lower_bound));
            w.u8(static_cast<std::uint8_t>(LeafMode::insert_new));
            w.ciphertext(cipher_.encrypt(value, axis));
        }
        send(MsgKind::leaf_position, w.take());
    }

    bool descend_point_query(std::uint32_t axis, Coord value) {
        LeafView view = descend(axis, Target::exact(value));
        if (!view.equal_pos) {
            send(MsgKind::not_found, {});
            return false;
        }
        PayloadWriter w;
        w.u16(static_cast<std::uint16_t>(*view.equal_pos));
        w.u8(static_cast<std::uint8_t>(LeafMode::present));
        send(MsgKind::leaf_position, w.take());
        return true;
    }

    void descend_virtual(std::uint32_t axis, const Target& t) {
        LeafView view = descend(axis, t);
        PayloadWriter w;
        if (view.equal_pos) {
            w.u16(static_cast<std::uint16_t>(*view.equal_pos));
            w.u8(static_cast<std::uint8_t>(LeafMode::present));
        } else {
            w.u16(static_cast<std::uint16_t>(view.lower_bound));
            w.u8(static_cast<std::uint8_t>(LeafMode::absent));
        }
        send(MsgKind::leaf_position, w.take());
    }

    std::vector<Point> fetch_gsl(const std::vector<Target>& q, std::uint32_t k) {
        require(q.size() == d_, Errc::dimension_mismatch, "query arity");
        require(k >= 1, Errc::bad_param, "k must be >= 1");
        send(MsgKind::begin_global_skyline, PayloadWriter().u32(k).u32(d_).take());
        for (std::uint32_t axis = 0; axis < d_; ++axis) descend_virtual(axis, q[axis]);
        return read_result_set();
    }

    std::vector<std::pair<Point, u128>> refine_knn(const std::vector<Point>& cands,
                                                   std::span<const Coord> q, std::uint32_t k) {
        std::vector<std::pair<Point, u128>> scored;
        scored.reserve(cands.size());
        for (const Point& p : cands) scored.emplace_back(p, distance_sq(p.coords, q));
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second < b.second;
            return a.first.id < b.first.id;
        });
        if (scored.size() > k) {
            if (opts_.include_kth_ties) {
                u128 kth = scored[k - 1].second;
                std::size_t end = k;
                while (end < scored.size() && scored[end].second == kth) ++end;
                scored.resize(end);
            } else {
                scored.resize(k);
            }
        }
        return scored;
    }

    // --- continuous NN ---

    std::set<PointId> nn_at(const Segment& seg, double t) {
        std::vector<Target> q(d_);
        std::vector<double> coords(d_);
        for (std::uint32_t i = 0; i < d_; ++i) {
            coords[i] = static_cast<double>(seg.a[i]) +
                        t * (static_cast<double>(seg.b[i]) - static_cast<double>(seg.a[i]));
            q[i] = Target::real(coords[i]);
        }
        auto cands = fetch_gsl(q, 1);
        std::set<PointId> best;
        long double best_d = 0;
        for (const Point& p : cands) {
            long double d2 = 0;
            for (std::uint32_t i = 0; i < d_; ++i) {
                long double diff = static_cast<long double>(p.coords[i]) - coords[i];
                d2 += diff * diff;
            }
            long double tol = 1e-12L * (d2 + best_d + 1.0L);
            if (best.empty() || d2 < best_d - tol) {
                best = {p.id};
                best_d = d2;
            } else if (d2 <= best_d + tol) {
                best.insert(p.id);
            }
            known_points_[p.id] = p;
        }
        return best;
    }

    void split_rec(const Segment& seg, double t0, double t1, const std::set<PointId>& set0,
                   const std::set<PointId>& set1, std::size_t depth,
                   std::vector<NNResultSegment>& tiles) {
        if (depth > opts_.continuous_depth_cap) throw ContinuousDepthError(tiles);

        std::vector<PointId> common;
        std::set_intersection(set0.begin(), set0.end(), set1.begin(), set1.end(),
                              std::back_inserter(common));
        if (!common.empty()) {
            tiles.push_back({common.front(), t0, t1});
            return;
        }

        const Point& nna = known_points_.at(*set0.begin());
        const Point& nnb = known_points_.at(*set1.begin());
        auto tc = bisector_split(nna.coords, nnb.coords, seg);
        if (!tc || *tc <= t0 + kSplitParamTolerance || *tc >= t1 - kSplitParamTolerance) {
            // the two are equidistant along the whole stretch; either is a
            // valid answer for the tie tile
            tiles.push_back({std::min(*set0.begin(), *set1.begin()), t0, t1});
            return;
        }
        auto setc = nn_at(seg, *tc);
        split_rec(seg, t0, *tc, set0, setc, depth + 1, tiles);
        split_rec(seg, *tc, t1, setc, set1, depth + 1, tiles);
    }

    // --- message plumbing ---

    void send(MsgKind kind, std::vector<std::uint8_t> payload) {
        write_message(stream_, Message{kind, std::move(payload)});
    }

    Message expect(MsgKind kind) {
        auto msg = read_message(stream_);
        require(msg.has_value(), Errc::protocol, "connection closed");
        if (msg->kind == MsgKind::error) {
            PayloadReader r(msg->payload);
            std::uint32_t code = r.u32();
            std::string what = r.text();
            fail(Errc::protocol, "server error " + std::to_string(code) + ": " + what);
        }
        require(msg->kind == kind, Errc::protocol, "unexpected message from server");
        return std::move(*msg);
    }

    bool read_bool() {
        Message m = expect(MsgKind::bool_result);
        PayloadReader r(m.payload);
        bool v = r.u8() != 0;
        r.done();
        return v;
    }

    void expect_bool(bool v) {
        require(read_bool() == v, Errc::protocol, "unexpected acknowledgement");
    }

    std::vector<Point> read_result_set() {
        Message m = expect(MsgKind::result_set);
        PayloadReader r(m.payload);
        std::uint32_t n = r.u32();
        std::vector<Point> out;
        out.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            Point p;
            p.id = r.u64();
            p.coords.resize(d_);
            for (std::uint32_t axis = 0; axis < d_; ++axis)
                p.coords[axis] = cipher_.decrypt(r.ciphertext(), axis);
            out.push_back(std::move(p));
        }
        r.done();
        return out;
    }

    ByteStream& stream_;
    const Cipher& cipher_;
    std::uint32_t d_;
    Options opts_;
    std::unordered_map<PointId, Point> known_points_;
};

}  // namespace sope
