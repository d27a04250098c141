#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "sope/common.hpp"
#include "sope/rtree.hpp"

// Server-side spatial algorithms over the encoded R-tree. The global-skyline
// family works in doubled encoding space (stored encodings scaled x2, signed)
// so that virtual query coordinates can sit strictly between stored ones; see
// BPlusTree::virtual_doubled.

namespace sope::query {

using GslLayers = std::vector<std::vector<EncodedPoint>>;

struct DoubledRect {
    std::vector<std::int64_t> lo, hi;
};

inline DoubledRect double_rect(const EncodedRect& r) {
    DoubledRect out;
    out.lo.reserve(r.lo.size());
    out.hi.reserve(r.hi.size());
    for (Encoding e : r.lo) out.lo.push_back(static_cast<std::int64_t>(e) * 2);
    for (Encoding e : r.hi)
        out.hi.push_back(e == kEncodingInfinity ? std::numeric_limits<std::int64_t>::max()
                                                : static_cast<std::int64_t>(e) * 2);
    return out;
}

namespace detail {

struct Box2 {
    std::vector<std::int64_t> lo, hi;

    static Box2 of_point(std::span<const Encoding> encs) {
        Box2 b;
        b.lo.reserve(encs.size());
        for (Encoding e : encs) b.lo.push_back(static_cast<std::int64_t>(e) * 2);
        b.hi = b.lo;
        return b;
    }

    static Box2 of_mbr(std::span<const Encoding> lo, std::span<const Encoding> hi) {
        Box2 b;
        b.lo.reserve(lo.size());
        b.hi.reserve(hi.size());
        for (Encoding e : lo) b.lo.push_back(static_cast<std::int64_t>(e) * 2);
        for (Encoding e : hi) b.hi.push_back(static_cast<std::int64_t>(e) * 2);
        return b;
    }

    bool intersects(const DoubledRect& r) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (hi[i] < r.lo[i] || lo[i] > r.hi[i]) return false;
        return true;
    }
};

inline u128 mindist_sq(const Box2& b, std::span<const std::int64_t> q) {
    u128 sum = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::int64_t c = std::clamp(q[i], b.lo[i], b.hi[i]);
        std::uint64_t d = c >= q[i] ? std::uint64_t(c) - std::uint64_t(q[i])
                                    : std::uint64_t(q[i]) - std::uint64_t(c);
        sum += u128(d) * d;
    }
    return sum;
}

}  // namespace detail

/// GloballyDominated: whether the point (or the whole rectangle, judged at
/// its vertex closest to q) is globally dominated by some member of the
/// given layer. Coordinates are in doubled encoding space.
inline bool globally_dominated(const detail::Box2& e, const std::vector<EncodedPoint>& layer,
                               std::span<const std::int64_t> q) {
    std::size_t d = q.size();
    std::vector<std::int64_t> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = std::clamp(q[i], e.lo[i], e.hi[i]);
    for (const EncodedPoint& g : layer) {
        std::size_t first = 0, second = 0;
        bool third = false;
        for (std::size_t j = 0; j < d; ++j) {
            std::int64_t gj = static_cast<std::int64_t>(g.encs[j]) * 2;
            std::int64_t a = gj - q[j];
            std::int64_t b = v[j] - q[j];
            if ((a > 0 && b > 0) || (a < 0 && b < 0)) ++first;
            std::uint64_t da = a >= 0 ? std::uint64_t(a) : std::uint64_t(-a);
            std::uint64_t db = b >= 0 ? std::uint64_t(b) : std::uint64_t(-b);
            if (da <= db) ++second;
            if (da < db) third = true;
        }
        if (first == d && second == d && third) return true;
    }
    return false;
}

inline bool dominated_in_every_layer(const detail::Box2& e, const GslLayers& layers,
                                     std::span<const std::int64_t> q) {
    for (const auto& layer : layers)
        if (!globally_dominated(e, layer, q)) return false;
    return !layers.empty();
}

struct GslOptions {
    bool prune = true;  // disable only to cross-check pruning safety in tests
};

/// k-global-skyline by best-first traversal: entries examined in ascending
/// distance from q, discarded only when every layer already dominates them,
/// points placed into the first layer that does not dominate them.
inline GslLayers k_global_skyline_impl(EncodedRTree& tree, std::span<const std::int64_t> q2,
                                       std::size_t k, const DoubledRect* constraint,
                                       const GslOptions& opts = {}) {
    require(k >= 1, Errc::bad_param, "k must be >= 1");
    GslLayers layers(k);

    struct Item {
        u128 key;
        std::uint64_t seq;
        bool is_point;
        EncodedPoint pt;
        std::uint64_t page;
        detail::Box2 box;
    };
    struct Cmp {
        bool operator()(const Item& a, const Item& b) const {
            if (a.key != b.key) return a.key > b.key;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Cmp> heap;
    std::uint64_t seq = 0;

    auto push_entry = [&](const EncodedRTree::Entry& e, bool leaf) {
        Item it;
        it.is_point = leaf;
        if (leaf) {
            it.pt = {e.head, e.lo};
            it.box = detail::Box2::of_point(e.lo);
        } else {
            it.page = e.head;
            it.box = detail::Box2::of_mbr(e.lo, e.hi);
        }
        if (constraint && !it.box.intersects(*constraint)) return;
        if (opts.prune && dominated_in_every_layer(it.box, layers, q2)) return;
        it.key = detail::mindist_sq(it.box, q2);
        it.seq = seq++;
        heap.push(std::move(it));
    };

    {
        EncodedRTree::Node root = tree.read_node(tree.root_page());
        for (const auto& e : root.entries) push_entry(e, root.leaf);
    }

    while (!heap.empty()) {
        Item it = heap.top();
        heap.pop();
        if (opts.prune && dominated_in_every_layer(it.box, layers, q2)) continue;
        if (!it.is_point) {
            EncodedRTree::Node n = tree.read_node(it.page);
            for (const auto& e : n.entries) push_entry(e, n.leaf);
            continue;
        }
        if (constraint) {
            bool inside = true;
            for (std::size_t i = 0; i < q2.size(); ++i)
                if (it.box.lo[i] < constraint->lo[i] || it.box.lo[i] > constraint->hi[i]) {
                    inside = false;
                    break;
                }
            if (!inside) continue;
        }
        for (std::size_t i = 0; i < k; ++i) {
            if (!globally_dominated(it.box, layers[i], q2)) {
                layers[i].push_back(it.pt);
                break;
            }
        }
    }
    return layers;
}

inline GslLayers k_global_skyline(EncodedRTree& tree, std::span<const std::int64_t> q2,
                                  std::size_t k, const GslOptions& opts = {}) {
    return k_global_skyline_impl(tree, q2, k, nullptr, opts);
}

inline GslLayers constrained_k_global_skyline(EncodedRTree& tree, const EncodedRect& region,
                                              std::span<const std::int64_t> q2, std::size_t k,
                                              const GslOptions& opts = {}) {
    DoubledRect r2 = double_rect(region);
    return k_global_skyline_impl(tree, q2, k, &r2, opts);
}

namespace detail {

inline bool dominates_min_enc(std::span<const Encoding> p, std::span<const Encoding> r) {
    bool strict = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > r[i]) return false;
        if (p[i] < r[i]) strict = true;
    }
    return strict;
}

}  // namespace detail

/// Branch-and-bound skyline (min condition on every axis), optionally
/// restricted to a constraint region.
inline std::vector<EncodedPoint> skyline_impl(EncodedRTree& tree, const EncodedRect* region) {
    std::vector<EncodedPoint> result;

    struct Item {
        u128 key;
        std::uint64_t seq;
        bool is_point;
        EncodedPoint pt;
        std::uint64_t page;
        std::vector<Encoding> lo;
    };
    struct Cmp {
        bool operator()(const Item& a, const Item& b) const {
            if (a.key != b.key) return a.key > b.key;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Cmp> heap;
    std::uint64_t seq = 0;

    auto dominated = [&](std::span<const Encoding> lo) {
        for (const auto& s : result)
            if (detail::dominates_min_enc(s.encs, lo)) return true;
        return false;
    };

    auto push_entry = [&](const EncodedRTree::Entry& e, bool leaf) {
        if (region) {
            if (leaf && !region->contains(e.lo)) return;
            if (!leaf && !region->intersects(e.lo, e.hi)) return;
        }
        if (dominated(e.lo)) return;
        Item it;
        it.is_point = leaf;
        it.lo = e.lo;
        if (leaf)
            it.pt = {e.head, e.lo};
        else
            it.page = e.head;
        u128 key = 0;
        for (Encoding v : e.lo) key += v;
        it.key = key;
        it.seq = seq++;
        heap.push(std::move(it));
    };

    {
        EncodedRTree::Node root = tree.read_node(tree.root_page());
        for (const auto& e : root.entries) push_entry(e, root.leaf);
    }

    while (!heap.empty()) {
        Item it = heap.top();
        heap.pop();
        if (dominated(it.lo)) continue;
        if (!it.is_point) {
            EncodedRTree::Node n = tree.read_node(it.page);
            for (const auto& e : n.entries) push_entry(e, n.leaf);
            continue;
        }
        result.push_back(it.pt);
    }
    return result;
}

inline std::vector<EncodedPoint> skyline(EncodedRTree& tree) { return skyline_impl(tree, nullptr); }

inline std::vector<EncodedPoint> constrained_skyline(EncodedRTree& tree,
                                                     const EncodedRect& region) {
    return skyline_impl(tree, &region);
}

}  // namespace sope::query
