#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sope/bptree.hpp"
#include "sope/common.hpp"
#include "sope/page_store.hpp"

namespace sope {

struct EncodedPoint {
    PointId id = 0;
    std::vector<Encoding> encs;
};

// Closed box in encoding space. kEncodingInfinity as hi compares naturally
// (it is the numeric maximum), so no special casing in the predicates.
struct EncodedRect {
    std::vector<Encoding> lo;
    std::vector<Encoding> hi;

    bool contains(std::span<const Encoding> p) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }

    bool intersects(std::span<const Encoding> other_lo,
                    std::span<const Encoding> other_hi) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (other_hi[i] < lo[i] || other_lo[i] > hi[i]) return false;
        return true;
    }
};

// R*-tree over EncodedPoints, one node per 4 KB page, no buffering. Classic
// R* policies: least-overlap ChooseSubtree at the leaf-parent level, forced
// reinsertion of 30% on first overflow per level, 40% minimum fill,
// margin-driven split axis. Ties always resolved by lowest page id or entry
// order so that two identically-ordered workloads produce identical trees.
class EncodedRTree {
public:
    struct Entry {
        std::uint64_t head = 0;  // point id (leaf) or child page (index)
        std::vector<Encoding> lo, hi;
    };

    struct Node {
        bool leaf = true;
        std::vector<Entry> entries;
    };

    EncodedRTree(PageStore& store, std::optional<std::uint32_t> create_dims) : store_(store) {
        if (create_dims) {
            dims_ = *create_dims;
            require(dims_ >= 1 && dims_ <= kMaxDimensions, Errc::bad_param,
                    "dimension count out of range");
            require(store_.page_count() == 0, Errc::io, "page store not empty");
            store_.allocate();  // header
            root_ = store_.allocate();
            write_node(root_, Node{});
            height_ = 0;
            count_ = 0;
            write_header();
        } else {
            read_header();
            rebuild_id_set();
        }
        leaf_cap_ = entry_capacity(true);
        index_cap_ = entry_capacity(false);
    }

    std::uint32_t dims() const { return dims_; }
    std::uint64_t height() const { return height_; }
    std::uint64_t size() const { return count_; }
    std::uint64_t root_page() const { return root_; }
    std::uint64_t page_count() const { return store_.page_count(); }
    std::size_t leaf_capacity() const { return leaf_cap_; }
    std::size_t index_capacity() const { return index_cap_; }
    PageStore& store() { return store_; }

    const PageCounters& page_stats() const { return store_.counters(); }
    void reset_page_stats() { store_.reset_counters(); }

    Node read_node(std::uint64_t page) const {
        std::uint8_t buf[kPageSize];
        store_.read_page(page, std::span<std::uint8_t>(buf, kPageSize));
        Node n;
        n.leaf = wire::get_u8(buf) == 0;
        std::uint16_t count = wire::get_u16(buf + 1);
        std::size_t per = n.leaf ? 8 + 8ull * dims_ : 8 + 16ull * dims_;
        require(3 + count * per <= kPageSize, Errc::corruption, "r-tree node overflows page");
        const std::uint8_t* p = buf + 3;
        n.entries.resize(count);
        for (auto& e : n.entries) {
            e.head = wire::get_u64(p);
            p += 8;
            e.lo.resize(dims_);
            e.hi.resize(dims_);
            for (std::uint32_t i = 0; i < dims_; ++i) {
                e.lo[i] = wire::get_u64(p);
                p += 8;
            }
            if (n.leaf) {
                e.hi = e.lo;
            } else {
                for (std::uint32_t i = 0; i < dims_; ++i) {
                    e.hi[i] = wire::get_u64(p);
                    p += 8;
                }
            }
        }
        return n;
    }

    void insert_point(const EncodedPoint& ep) {
        require(ep.encs.size() == dims_, Errc::dimension_mismatch, "encoded point arity");
        require(!ids_.count(ep.id), Errc::duplicate, "duplicate point id");
        for (Encoding e : ep.encs)
            require(e < kEncodingInfinity, Errc::bad_param, "reserved encoding value");
        reinserted_levels_.clear();
        Entry e{ep.id, ep.encs, ep.encs};
        insert_entry(e, 0);
        ids_.insert(ep.id);
        ++count_;
        write_header();
    }

    /// Applies a B+-tree mutation range to every stored point's i-th encoding,
    /// in place, repairing ancestor MBRs bottom-up. The remap is strictly
    /// increasing so spatial order (and intra-node entry order) is preserved.
    std::size_t axis_range_update(std::uint32_t axis, const MutationRange& range) {
        require(axis < dims_, Errc::dimension_mismatch, "axis out of range");
        if (range.empty()) return 0;
        std::unordered_map<Encoding, Encoding> remap(range.remap.begin(), range.remap.end());
        Encoding lo = range.lo;
        Encoding hi = range.hi_infinite ? kEncodingInfinity : range.hi;
        std::size_t updated = 0;
        update_rec(root_, axis, lo, hi, remap, updated);
        return updated;
    }

    bool contains_id(PointId id) const { return ids_.count(id) != 0; }

    std::vector<PointId> point_search(std::span<const Encoding> encs) const {
        require(encs.size() == dims_, Errc::dimension_mismatch, "point arity");
        std::vector<PointId> out;
        point_search_rec(root_, encs, out);
        return out;
    }

    std::vector<EncodedPoint> range_search(const EncodedRect& box) const {
        require(box.lo.size() == dims_ && box.hi.size() == dims_, Errc::dimension_mismatch,
                "box arity");
        std::vector<EncodedPoint> out;
        range_search_rec(root_, box, out);
        return out;
    }

    /// Structural sweep for tests: MBR containment, fan-out bounds, uniform
    /// leaf depth.
    void check_invariants() const {
        std::int64_t leaf_depth = -1;
        check_rec(root_, static_cast<std::int64_t>(height_), leaf_depth, true);
    }

private:
    static constexpr std::uint32_t kMagic = 0x53525431;  // "SRT1"

    std::size_t entry_capacity(bool leaf) const {
        std::size_t per = leaf ? 8 + 8ull * dims_ : 8 + 16ull * dims_;
        return (kPageSize - 3) / per;
    }

    std::size_t min_fill(bool leaf) const {
        std::size_t cap = leaf ? leaf_cap_ : index_cap_;
        return std::max<std::size_t>(1, cap * 2 / 5);
    }

    static void extend(std::vector<Encoding>& lo, std::vector<Encoding>& hi, const Entry& e) {
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = std::min(lo[i], e.lo[i]);
            hi[i] = std::max(hi[i], e.hi[i]);
        }
    }

    static void rect_of(const Node& n, std::vector<Encoding>& lo, std::vector<Encoding>& hi) {
        lo = n.entries.front().lo;
        hi = n.entries.front().hi;
        for (std::size_t i = 1; i < n.entries.size(); ++i) extend(lo, hi, n.entries[i]);
    }

    static long double area_of(std::span<const Encoding> lo, std::span<const Encoding> hi) {
        long double a = 1.0L;
        for (std::size_t i = 0; i < lo.size(); ++i)
            a *= static_cast<long double>(hi[i] - lo[i]);
        return a;
    }

    static long double margin_of(std::span<const Encoding> lo, std::span<const Encoding> hi) {
        long double m = 0.0L;
        for (std::size_t i = 0; i < lo.size(); ++i)
            m += static_cast<long double>(hi[i] - lo[i]);
        return m;
    }

    static long double overlap_of(std::span<const Encoding> alo, std::span<const Encoding> ahi,
                                  std::span<const Encoding> blo, std::span<const Encoding> bhi) {
        long double v = 1.0L;
        for (std::size_t i = 0; i < alo.size(); ++i) {
            Encoding lo = std::max(alo[i], blo[i]);
            Encoding hi = std::min(ahi[i], bhi[i]);
            if (hi < lo) return 0.0L;
            v *= static_cast<long double>(hi - lo);
        }
        return v;
    }

    void insert_entry(const Entry& e, std::uint64_t target_level) {
        std::vector<std::uint64_t> pages{root_};
        std::vector<std::size_t> slots;
        std::vector<Node> nodes;
        std::uint64_t level = height_;
        Node node = read_node(root_);
        while (level > target_level) {
            std::size_t slot = choose_subtree(node, e, level == target_level + 1);
            nodes.push_back(node);
            slots.push_back(slot);
            pages.push_back(node.entries[slot].head);
            node = read_node(pages.back());
            --level;
        }
        node.entries.push_back(e);
        resolve_overflow(pages, slots, nodes, node, target_level);
    }

    std::size_t choose_subtree(const Node& node, const Entry& e, bool children_are_leaves) const {
        struct Cand {
            std::size_t idx;
            long double enlarge;
            long double area;
        };
        std::vector<Cand> cands;
        cands.reserve(node.entries.size());
        for (std::size_t j = 0; j < node.entries.size(); ++j) {
            const Entry& c = node.entries[j];
            std::vector<Encoding> ulo = c.lo, uhi = c.hi;
            extend(ulo, uhi, e);
            long double area = area_of(c.lo, c.hi);
            cands.push_back({j, area_of(ulo, uhi) - area, area});
        }
        auto better_basic = [&](const Cand& a, const Cand& b) {
            if (a.enlarge != b.enlarge) return a.enlarge < b.enlarge;
            if (a.area != b.area) return a.area < b.area;
            return node.entries[a.idx].head < node.entries[b.idx].head;
        };
        if (!children_are_leaves)
            return std::min_element(cands.begin(), cands.end(), better_basic)->idx;

        // Least overlap enlargement, evaluated for the 32 least-enlarging
        // candidates as in the original R*-tree. The pool is in basic order,
        // so strict comparison keeps ties deterministic.
        std::vector<Cand> pool = cands;
        std::sort(pool.begin(), pool.end(), better_basic);
        if (pool.size() > 32) pool.resize(32);
        std::size_t best = pool.front().idx;
        long double best_delta = 0;
        bool first = true;
        for (const Cand& cand : pool) {
            const Entry& c = node.entries[cand.idx];
            std::vector<Encoding> ulo = c.lo, uhi = c.hi;
            extend(ulo, uhi, e);
            long double delta = 0;
            for (std::size_t k = 0; k < node.entries.size(); ++k) {
                if (k == cand.idx) continue;
                const Entry& o = node.entries[k];
                delta += overlap_of(ulo, uhi, o.lo, o.hi) - overlap_of(c.lo, c.hi, o.lo, o.hi);
            }
            if (first || delta < best_delta) {
                best = cand.idx;
                best_delta = delta;
                first = false;
            }
        }
        return best;
    }

    void resolve_overflow(std::vector<std::uint64_t>& pages, std::vector<std::size_t>& slots,
                          std::vector<Node>& ancestors, Node node, std::uint64_t level) {
        std::size_t cap = node.leaf ? leaf_cap_ : index_cap_;
        if (node.entries.size() <= cap) {
            write_node(pages.back(), node);
            repair_ancestors(pages, slots, ancestors, node);
            return;
        }

        bool is_root = pages.size() == 1;
        if (!is_root && !reinserted_levels_.count(level)) {
            reinserted_levels_.insert(level);
            forced_reinsert(pages, slots, ancestors, std::move(node), level, cap);
            return;
        }

        auto [left, right] = rstar_split(std::move(node));
        write_node(pages.back(), left);
        std::uint64_t right_page = store_.allocate();
        write_node(right_page, right);

        Entry left_entry, right_entry;
        left_entry.head = pages.back();
        rect_of(left, left_entry.lo, left_entry.hi);
        right_entry.head = right_page;
        rect_of(right, right_entry.lo, right_entry.hi);

        if (is_root) {
            Node new_root;
            new_root.leaf = false;
            new_root.entries = {left_entry, right_entry};
            std::uint64_t new_root_page = store_.allocate();
            write_node(new_root_page, new_root);
            root_ = new_root_page;
            ++height_;
            write_header();
            return;
        }

        Node parent = ancestors.back();
        std::size_t slot = slots.back();
        parent.entries[slot] = left_entry;
        parent.entries.insert(parent.entries.begin() + slot + 1, right_entry);
        pages.pop_back();
        slots.pop_back();
        ancestors.pop_back();
        resolve_overflow(pages, slots, ancestors, std::move(parent), level + 1);
    }

    void forced_reinsert(std::vector<std::uint64_t>& pages, std::vector<std::size_t>& slots,
                         std::vector<Node>& ancestors, Node node, std::uint64_t level,
                         std::size_t cap) {
        std::vector<Encoding> nlo, nhi;
        rect_of(node, nlo, nhi);
        std::vector<long double> center(dims_);
        for (std::uint32_t i = 0; i < dims_; ++i)
            center[i] = (static_cast<long double>(nlo[i]) + static_cast<long double>(nhi[i])) / 2;

        std::vector<std::size_t> order(node.entries.size());
        std::iota(order.begin(), order.end(), 0);
        auto dist = [&](std::size_t j) {
            long double s = 0;
            for (std::uint32_t i = 0; i < dims_; ++i) {
                long double c = (static_cast<long double>(node.entries[j].lo[i]) +
                                 static_cast<long double>(node.entries[j].hi[i])) /
                                2;
                s += (c - center[i]) * (c - center[i]);
            }
            return s;
        };
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist(a) > dist(b); });
        std::size_t p = std::max<std::size_t>(1, cap * 3 / 10);

        std::vector<Entry> removed;
        std::unordered_set<std::size_t> removed_idx;
        for (std::size_t i = 0; i < p; ++i) {
            removed.push_back(node.entries[order[i]]);
            removed_idx.insert(order[i]);
        }
        Node kept;
        kept.leaf = node.leaf;
        for (std::size_t j = 0; j < node.entries.size(); ++j)
            if (!removed_idx.count(j)) kept.entries.push_back(node.entries[j]);

        write_node(pages.back(), kept);
        repair_ancestors(pages, slots, ancestors, kept);

        // close reinsert: nearest first
        for (auto it = removed.rbegin(); it != removed.rend(); ++it) insert_entry(*it, level);
    }

    void repair_ancestors(const std::vector<std::uint64_t>& pages,
                          const std::vector<std::size_t>& slots,
                          const std::vector<Node>& ancestors, const Node& changed) {
        if (pages.size() < 2) return;
        std::vector<Encoding> lo, hi;
        rect_of(changed, lo, hi);
        for (std::size_t i = pages.size() - 1; i-- > 0;) {
            Node parent = ancestors[i];
            parent.entries[slots[i]].lo = lo;
            parent.entries[slots[i]].hi = hi;
            write_node(pages[i], parent);
            rect_of(parent, lo, hi);
        }
    }

    std::pair<Node, Node> rstar_split(Node node) {
        std::size_t total = node.entries.size();
        std::size_t m = min_fill(node.leaf);
        require(total >= 2 * m, Errc::corruption, "split underflow");

        auto margins_for = [&](std::vector<std::size_t>& order) {
            // prefix/suffix rects over a sorted order
            std::vector<std::vector<Encoding>> plo(total), phi(total), slo(total), shi(total);
            for (std::size_t i = 0; i < total; ++i) {
                const Entry& e = node.entries[order[i]];
                if (i == 0) {
                    plo[0] = e.lo;
                    phi[0] = e.hi;
                } else {
                    plo[i] = plo[i - 1];
                    phi[i] = phi[i - 1];
                    extend(plo[i], phi[i], e);
                }
            }
            for (std::size_t i = total; i-- > 0;) {
                const Entry& e = node.entries[order[i]];
                if (i + 1 == total) {
                    slo[i] = e.lo;
                    shi[i] = e.hi;
                } else {
                    slo[i] = slo[i + 1];
                    shi[i] = shi[i + 1];
                    extend(slo[i], shi[i], e);
                }
            }
            return std::make_tuple(plo, phi, slo, shi);
        };

        long double best_axis_margin = 0;
        std::uint32_t best_axis = 0;
        for (std::uint32_t axis = 0; axis < dims_; ++axis) {
            long double margin_sum = 0;
            for (int by_hi = 0; by_hi < 2; ++by_hi) {
                std::vector<std::size_t> order(total);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    const Entry& ea = node.entries[a];
                    const Entry& eb = node.entries[b];
                    if (by_hi)
                        return ea.hi[axis] != eb.hi[axis] ? ea.hi[axis] < eb.hi[axis]
                                                          : ea.lo[axis] < eb.lo[axis];
                    return ea.lo[axis] != eb.lo[axis] ? ea.lo[axis] < eb.lo[axis]
                                                      : ea.hi[axis] < eb.hi[axis];
                });
                auto [plo, phi, slo, shi] = margins_for(order);
                for (std::size_t k = m; k <= total - m; ++k)
                    margin_sum += margin_of(plo[k - 1], phi[k - 1]) + margin_of(slo[k], shi[k]);
            }
            if (axis == 0 || margin_sum < best_axis_margin) {
                best_axis_margin = margin_sum;
                best_axis = axis;
            }
        }

        std::vector<std::size_t> best_order;
        std::size_t best_k = 0;
        long double best_overlap = 0, best_area = 0;
        bool first = true;
        for (int by_hi = 0; by_hi < 2; ++by_hi) {
            std::vector<std::size_t> order(total);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const Entry& ea = node.entries[a];
                const Entry& eb = node.entries[b];
                if (by_hi)
                    return ea.hi[best_axis] != eb.hi[best_axis] ? ea.hi[best_axis] < eb.hi[best_axis]
                                                                : ea.lo[best_axis] < eb.lo[best_axis];
                return ea.lo[best_axis] != eb.lo[best_axis] ? ea.lo[best_axis] < eb.lo[best_axis]
                                                            : ea.hi[best_axis] < eb.hi[best_axis];
            });
            auto [plo, phi, slo, shi] = margins_for(order);
            for (std::size_t k = m; k <= total - m; ++k) {
                long double ov = overlap_of(plo[k - 1], phi[k - 1], slo[k], shi[k]);
                long double ar = area_of(plo[k - 1], phi[k - 1]) + area_of(slo[k], shi[k]);
                if (first || ov < best_overlap || (ov == best_overlap && ar < best_area)) {
                    best_overlap = ov;
                    best_area = ar;
                    best_order = order;
                    best_k = k;
                    first = false;
                }
            }
        }

        Node left, right;
        left.leaf = right.leaf = node.leaf;
        for (std::size_t i = 0; i < total; ++i)
            (i < best_k ? left : right).entries.push_back(node.entries[best_order[i]]);
        return {left, right};
    }

    bool update_rec(std::uint64_t page, std::uint32_t axis, Encoding lo, Encoding hi,
                    const std::unordered_map<Encoding, Encoding>& remap, std::size_t& updated) {
        Node n = read_node(page);
        bool changed = false;
        if (n.leaf) {
            for (auto& e : n.entries) {
                if (e.lo[axis] < lo || e.lo[axis] > hi) continue;
                auto it = remap.find(e.lo[axis]);
                require(it != remap.end(), Errc::corruption,
                        "stored encoding inside mutation range missing from remap");
                e.lo[axis] = e.hi[axis] = it->second;
                changed = true;
                ++updated;
            }
        } else {
            for (auto& e : n.entries) {
                if (e.hi[axis] < lo || e.lo[axis] > hi) continue;
                if (update_rec(e.head, axis, lo, hi, remap, updated)) {
                    Node child = read_node(e.head);
                    rect_of(child, e.lo, e.hi);
                    changed = true;
                }
            }
        }
        if (changed) write_node(page, n);
        return changed;
    }

    void point_search_rec(std::uint64_t page, std::span<const Encoding> encs,
                          std::vector<PointId>& out) const {
        Node n = read_node(page);
        if (n.leaf) {
            for (const auto& e : n.entries)
                if (std::equal(encs.begin(), encs.end(), e.lo.begin())) out.push_back(e.head);
            return;
        }
        for (const auto& e : n.entries) {
            bool inside = true;
            for (std::size_t i = 0; i < encs.size(); ++i)
                if (encs[i] < e.lo[i] || encs[i] > e.hi[i]) {
                    inside = false;
                    break;
                }
            if (inside) point_search_rec(e.head, encs, out);
        }
    }

    void range_search_rec(std::uint64_t page, const EncodedRect& box,
                          std::vector<EncodedPoint>& out) const {
        Node n = read_node(page);
        if (n.leaf) {
            for (const auto& e : n.entries)
                if (box.contains(e.lo)) out.push_back({e.head, e.lo});
            return;
        }
        for (const auto& e : n.entries)
            if (box.intersects(e.lo, e.hi)) range_search_rec(e.head, box, out);
    }

    void check_rec(std::uint64_t page, std::int64_t depth, std::int64_t& leaf_depth,
                   bool is_root) const {
        Node n = read_node(page);
        std::size_t cap = n.leaf ? leaf_cap_ : index_cap_;
        require(n.entries.size() <= cap, Errc::corruption, "fan-out above capacity");
        if (!is_root && count_ > 0)
            require(n.entries.size() >= 1, Errc::corruption, "empty non-root node");
        if (n.leaf) {
            require(depth == 0, Errc::corruption, "leaf at wrong depth");
            if (leaf_depth < 0) leaf_depth = depth;
            return;
        }
        for (const auto& e : n.entries) {
            Node child = read_node(e.head);
            std::vector<Encoding> clo, chi;
            if (!child.entries.empty()) {
                rect_of(child, clo, chi);
                for (std::uint32_t i = 0; i < dims_; ++i)
                    require(e.lo[i] <= clo[i] && chi[i] <= e.hi[i], Errc::corruption,
                            "child MBR not contained in parent entry");
            }
            check_rec(e.head, depth - 1, leaf_depth, false);
        }
    }

    void rebuild_id_set() {
        if (count_ == 0) return;
        std::vector<std::uint64_t> stack{root_};
        while (!stack.empty()) {
            std::uint64_t page = stack.back();
            stack.pop_back();
            Node n = read_node(page);
            for (const auto& e : n.entries) {
                if (n.leaf)
                    ids_.insert(e.head);
                else
                    stack.push_back(e.head);
            }
        }
    }

    void write_node(std::uint64_t page, const Node& n) {
        std::uint8_t buf[kPageSize] = {};
        wire::put_u8(buf, n.leaf ? 0 : 1);
        wire::put_u16(buf + 1, static_cast<std::uint16_t>(n.entries.size()));
        std::uint8_t* p = buf + 3;
        for (const auto& e : n.entries) {
            wire::put_u64(p, e.head);
            p += 8;
            for (std::uint32_t i = 0; i < dims_; ++i) {
                wire::put_u64(p, e.lo[i]);
                p += 8;
            }
            if (!n.leaf)
                for (std::uint32_t i = 0; i < dims_; ++i) {
                    wire::put_u64(p, e.hi[i]);
                    p += 8;
                }
        }
        store_.write_page(page, std::span<const std::uint8_t>(buf, kPageSize));
    }

    void read_header() {
        std::uint8_t buf[kPageSize];
        require(store_.page_count() > 0, Errc::io, "empty page store");
        store_.read_page(0, std::span<std::uint8_t>(buf, kPageSize));
        require(wire::get_u32(buf) == kMagic, Errc::io, "bad r-tree page-file magic");
        dims_ = wire::get_u32(buf + 8);
        root_ = wire::get_u64(buf + 16);
        height_ = wire::get_u64(buf + 24);
        count_ = wire::get_u64(buf + 32);
        require(dims_ >= 1 && dims_ <= kMaxDimensions, Errc::corruption, "bad dims in header");
    }

    void write_header() {
        std::uint8_t buf[kPageSize] = {};
        wire::put_u32(buf, kMagic);
        wire::put_u32(buf + 4, 1);
        wire::put_u32(buf + 8, dims_);
        wire::put_u64(buf + 16, root_);
        wire::put_u64(buf + 24, height_);
        wire::put_u64(buf + 32, count_);
        store_.write_page(0, std::span<const std::uint8_t>(buf, kPageSize));
    }

    PageStore& store_;
    std::uint32_t dims_ = 0;
    std::uint64_t root_ = 0;
    std::uint64_t height_ = 0;
    std::uint64_t count_ = 0;
    std::size_t leaf_cap_ = 0;
    std::size_t index_cap_ = 0;
    std::unordered_set<PointId> ids_;
    std::set<std::uint64_t> reinserted_levels_;
};

}  // namespace sope
