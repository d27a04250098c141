#pragma once

#include <bit>
#include <optional>
#include <span>
#include <vector>

#include "sope/ciphertext.hpp"
#include "sope/common.hpp"
#include "sope/page_store.hpp"

namespace sope {

// Largest branching factor whose index node fits a 4 KB page:
// 3-byte node header + B page refs + (B-1) 16-byte ciphertexts.
inline constexpr std::uint64_t kPageDerivedBranching = 171;

// Root-to-leaf child indices, then the position within the leaf.
using PathSteps = std::vector<std::uint16_t>;

struct DescentPath {
    std::vector<std::uint64_t> pages;  // root..leaf
    PathSteps steps;                   // child taken at each index level
};

struct MutationRange {
    Encoding lo = 0;
    Encoding hi = 0;
    bool hi_infinite = false;
    // (old encoding -> new encoding), strictly increasing on both sides
    std::vector<std::pair<Encoding, Encoding>> remap;

    bool empty() const { return remap.empty(); }
};

inline unsigned group_bits_for(std::uint64_t branching) {
    require(branching >= 2, Errc::bad_param, "branching factor must be >= 2");
    return std::bit_width(branching - 1);
}

/// Concatenates ceil(log2 B)-bit groups, most significant first. The last
/// step is the position within the leaf.
inline Encoding encode_path(std::span<const std::uint16_t> steps, std::uint64_t branching) {
    unsigned g = group_bits_for(branching);
    require(steps.size() * g <= kMaxEncodingBits, Errc::encoding_overflow,
            "tree too deep for the encoding width");
    Encoding e = 0;
    for (std::uint16_t s : steps) {
        require(s < branching, Errc::bad_param, "path step exceeds branching factor");
        e = (e << g) | s;
    }
    return e;
}

// Per-axis B+-tree over ciphertexts. Key order is established entirely by the
// client during interactive descents; the server never compares plaintexts.
// Leaf/path positions define the mutable order-preserving encodings, and every
// insertion reports exactly the set of encodings it invalidated.
//
// Conventions: splits keep ceil(n/2) entries in the left node; separators are
// copies of the max key of the left subtree, so a descent follows the first
// separator >= target and equal keys are found in the left child.
class BPlusTree {
public:
    struct Node {
        bool leaf = true;
        std::vector<Ciphertext> keys;          // leaf keys or index separators
        std::vector<std::uint64_t> children;   // index nodes only; keys.size()+1
    };

    struct InsertResult {
        Encoding encoding = 0;
        MutationRange range;
    };

    BPlusTree(PageStore& store, std::optional<std::uint64_t> create_branching)
        : store_(store) {
        if (create_branching) {
            branching_ = *create_branching;
            require(branching_ >= 2 && branching_ <= kPageDerivedBranching, Errc::bad_param,
                    "branching factor out of range");
            require(store_.page_count() == 0, Errc::io, "page store not empty");
            store_.allocate();  // header page
            root_ = store_.allocate();
            Node empty_leaf;
            write_node(root_, empty_leaf);
            height_ = 0;
            key_count_ = 0;
            write_header();
        } else {
            read_header();
        }
        group_bits_ = group_bits_for(branching_);
    }

    std::uint64_t branching() const { return branching_; }
    std::uint64_t height() const { return height_; }
    std::uint64_t levels() const { return height_ + 1; }
    std::uint64_t key_count() const { return key_count_; }
    std::uint64_t root_page() const { return root_; }
    unsigned group_bits() const { return group_bits_; }
    std::uint64_t page_count() const { return store_.page_count(); }
    PageStore& store() { return store_; }

    /// True when one more level still fits the encoding width; checked before
    /// any multi-axis insertion is applied.
    bool can_grow() const { return (levels() + 1) * group_bits_ <= kMaxEncodingBits; }

    Node read_node(std::uint64_t page) const {
        std::uint8_t buf[kPageSize];
        store_.read_page(page, std::span<std::uint8_t>(buf, kPageSize));
        Node n;
        n.leaf = wire::get_u8(buf) == 0;
        std::uint16_t count = wire::get_u16(buf + 1);
        const std::uint8_t* p = buf + 3;
        if (n.leaf) {
            require(count <= branching_, Errc::corruption, "leaf count out of range");
            n.keys.resize(count);
            for (auto& k : n.keys) {
                std::copy(p, p + kCiphertextSize, k.bytes.begin());
                p += kCiphertextSize;
            }
        } else {
            require(count >= 1 && count <= branching_, Errc::corruption,
                    "index fanout out of range");
            n.children.resize(count);
            for (auto& c : n.children) {
                c = wire::get_u64(p);
                p += 8;
            }
            n.keys.resize(count - 1);
            for (auto& k : n.keys) {
                std::copy(p, p + kCiphertextSize, k.bytes.begin());
                p += kCiphertextSize;
            }
        }
        return n;
    }

    /// descend_step: resolve the child the client selected.
    std::uint64_t child_of(const Node& node, std::uint16_t chosen) const {
        require(!node.leaf, Errc::protocol, "descend into a leaf");
        require(chosen < node.children.size(), Errc::protocol, "child index out of range");
        return node.children[chosen];
    }

    Encoding encoding_at(const DescentPath& path, std::uint16_t pos) const {
        PathSteps steps = path.steps;
        steps.push_back(pos);
        return encode_path(steps, branching_);
    }

    InsertResult insert_at(const DescentPath& path, std::uint16_t pos, const Ciphertext& c) {
        validate_path(path);
        Node leaf = read_node(path.pages.back());
        require(leaf.leaf, Errc::protocol, "insert position not in a leaf");
        require(pos <= leaf.keys.size(), Errc::protocol, "leaf position out of range");
        if (pos < leaf.keys.size() && leaf.keys[pos] == c)
            return {encoding_at(path, pos), {}};

        // Topmost node that changes: the first non-full ancestor above the
        // chain of full nodes (possibly a brand-new root).
        std::size_t full_chain = 0;
        std::vector<Node> path_nodes(path.pages.size());
        path_nodes.back() = leaf;
        if (leaf.keys.size() == branching_) {
            full_chain = 1;
            for (std::size_t i = path.pages.size() - 1; i-- > 0;) {
                path_nodes[i] = read_node(path.pages[i]);
                if (path_nodes[i].children.size() == branching_)
                    ++full_chain;
                else
                    break;
            }
        }
        bool root_splits = full_chain == path.pages.size();
        require(!root_splits || can_grow(), Errc::encoding_overflow,
                "tree too deep for the encoding width");

        std::size_t top_idx = root_splits ? 0 : path.pages.size() - 1 - full_chain;
        Encoding prefix = 0;
        for (std::size_t i = 0; i < top_idx; ++i)
            prefix = (prefix << group_bits_) | path.steps[i];

        std::optional<Encoding> global_max = max_encoding();
        std::vector<std::pair<Ciphertext, Encoding>> before;
        collect_encodings(path.pages[top_idx], prefix, before);

        apply_insert(path, pos, c);

        std::uint64_t after_root = root_splits ? root_ : path.pages[top_idx];
        std::vector<std::pair<Ciphertext, Encoding>> after;
        collect_encodings(after_root, prefix, after);

        InsertResult result;
        std::size_t bi = 0;
        bool saw_new = false;
        for (const auto& [cipher, enc] : after) {
            if (!saw_new && cipher == c) {
                result.encoding = enc;
                saw_new = true;
                continue;
            }
            require(bi < before.size(), Errc::corruption, "re-encode drift");
            if (before[bi].second != enc)
                result.range.remap.emplace_back(before[bi].second, enc);
            ++bi;
        }
        require(saw_new && bi == before.size(), Errc::corruption, "re-encode drift");

        if (!result.range.remap.empty()) {
            result.range.lo = result.range.remap.front().first;
            Encoding max_changed = result.range.remap.back().first;
            result.range.hi_infinite = global_max && *global_max == max_changed;
            result.range.hi = result.range.hi_infinite ? kEncodingInfinity : max_changed;
        }
        return result;
    }

    /// Decodes an encoding back into a root-to-leaf path and returns the
    /// ciphertext stored there. Stale encodings surface as errors.
    Ciphertext lookup_ciphertext(Encoding e) const {
        unsigned width = static_cast<unsigned>(levels()) * group_bits_;
        require(width >= 64 || (e >> width) == 0, Errc::not_found, "stale encoding: too wide");
        std::uint64_t page = root_;
        for (std::uint64_t level = 0; level < height_; ++level) {
            unsigned shift = static_cast<unsigned>(levels() - 1 - level) * group_bits_;
            std::uint16_t step =
                static_cast<std::uint16_t>((e >> shift) & ((1u << group_bits_) - 1));
            Node n = read_node(page);
            require(!n.leaf, Errc::corruption, "unbalanced tree");
            require(step < n.children.size(), Errc::not_found, "stale encoding: no such child");
            page = n.children[step];
        }
        Node leaf = read_node(page);
        require(leaf.leaf, Errc::corruption, "unbalanced tree");
        std::uint16_t pos = static_cast<std::uint16_t>(e & ((1u << group_bits_) - 1));
        require(pos < leaf.keys.size(), Errc::not_found, "stale encoding: no such slot");
        return leaf.keys[pos];
    }

    /// Recomputes every key's encoding by exhaustive traversal, in key order.
    std::vector<std::pair<Ciphertext, Encoding>> full_reencode() const {
        std::vector<std::pair<Ciphertext, Encoding>> out;
        if (key_count_ > 0 || height_ > 0) collect_encodings(root_, 0, out);
        return out;
    }

    void erase(const Ciphertext&) { fail(Errc::unsupported, "deletion is not supported"); }

    // --- virtual encodings for non-materialized query coordinates ---

    /// Lower range-corner encoding: everything >= the corner. The +inf
    /// sentinel is returned when the corner exceeds every stored key.
    Encoding virtual_lower(const DescentPath& path, std::uint16_t pos, bool present) const {
        if (present) return encoding_at(path, pos);
        Node leaf = read_node(path.pages.back());
        if (pos < leaf.keys.size()) return encoding_at(path, pos);
        if (leaf.keys.empty() || is_rightmost(path)) return kEncodingInfinity;
        return encoding_at(path, static_cast<std::uint16_t>(leaf.keys.size() - 1)) + 1;
    }

    /// Upper range-corner encoding: everything <= the corner. nullopt means
    /// the corner sits below every stored key (provably empty box).
    std::optional<Encoding> virtual_upper(const DescentPath& path, std::uint16_t pos,
                                          bool present) const {
        if (present) return encoding_at(path, pos);
        Node leaf = read_node(path.pages.back());
        if (leaf.keys.empty()) return std::nullopt;
        if (pos >= leaf.keys.size())
            return encoding_at(path, static_cast<std::uint16_t>(leaf.keys.size() - 1));
        Encoding e = encoding_at(path, pos);
        if (e == 0) return std::nullopt;
        return e - 1;
    }

    /// Doubled-space coordinate for dominance/distance queries: stored
    /// encodings are scaled x2, an absent coordinate maps to the odd value
    /// just below its successor so it never collides with a stored key.
    std::int64_t virtual_doubled(const DescentPath& path, std::uint16_t pos,
                                 bool present) const {
        if (present) return static_cast<std::int64_t>(encoding_at(path, pos)) * 2;
        Node leaf = read_node(path.pages.back());
        if (pos < leaf.keys.size())
            return static_cast<std::int64_t>(encoding_at(path, pos)) * 2 - 1;
        if (leaf.keys.empty()) return -1;
        Encoding last = encoding_at(path, static_cast<std::uint16_t>(leaf.keys.size() - 1));
        return static_cast<std::int64_t>(last) * 2 + 1;
    }

private:
    static constexpr std::uint32_t kMagic = 0x53425031;  // "SBP1"

    void validate_path(const DescentPath& path) const {
        require(!path.pages.empty() && path.steps.size() + 1 == path.pages.size(),
                Errc::protocol, "malformed descent path");
        require(path.pages.size() == levels(), Errc::protocol, "descent depth mismatch");
        require(path.pages.front() == root_, Errc::protocol, "descent does not start at root");
    }

    bool is_rightmost(const DescentPath& path) const {
        for (std::size_t i = 0; i < path.steps.size(); ++i) {
            Node n = read_node(path.pages[i]);
            if (path.steps[i] + 1u != n.children.size()) return false;
        }
        return true;
    }

    std::optional<Encoding> max_encoding() const {
        if (key_count_ == 0) return std::nullopt;
        std::uint64_t page = root_;
        Encoding prefix = 0;
        for (std::uint64_t level = 0; level < height_; ++level) {
            Node n = read_node(page);
            prefix = (prefix << group_bits_) | (n.children.size() - 1);
            page = n.children.back();
        }
        Node leaf = read_node(page);
        require(!leaf.keys.empty(), Errc::corruption, "empty rightmost leaf");
        return (prefix << group_bits_) | (leaf.keys.size() - 1);
    }

    void collect_encodings(std::uint64_t page, Encoding prefix,
                           std::vector<std::pair<Ciphertext, Encoding>>& out) const {
        Node n = read_node(page);
        if (n.leaf) {
            for (std::size_t pos = 0; pos < n.keys.size(); ++pos)
                out.emplace_back(n.keys[pos], (prefix << group_bits_) | pos);
        } else {
            for (std::size_t j = 0; j < n.children.size(); ++j)
                collect_encodings(n.children[j], (prefix << group_bits_) | j, out);
        }
    }

    void apply_insert(const DescentPath& path, std::uint16_t pos, const Ciphertext& c) {
        Node leaf = read_node(path.pages.back());
        leaf.keys.insert(leaf.keys.begin() + pos, c);
        ++key_count_;

        if (leaf.keys.size() <= branching_) {
            write_node(path.pages.back(), leaf);
            write_header();
            return;
        }

        // Split chain: carry (separator, right sibling) upward.
        std::size_t cut = (leaf.keys.size() + 1) / 2;
        Node right;
        right.leaf = true;
        right.keys.assign(leaf.keys.begin() + cut, leaf.keys.end());
        leaf.keys.resize(cut);
        Ciphertext sep = leaf.keys.back();
        write_node(path.pages.back(), leaf);
        std::uint64_t right_page = store_.allocate();
        write_node(right_page, right);

        std::size_t level = path.pages.size() - 1;
        while (level > 0) {
            --level;
            Node parent = read_node(path.pages[level]);
            std::uint16_t at = path.steps[level];
            parent.children.insert(parent.children.begin() + at + 1, right_page);
            parent.keys.insert(parent.keys.begin() + at, sep);
            if (parent.children.size() <= branching_) {
                write_node(path.pages[level], parent);
                write_header();
                return;
            }
            std::size_t ccut = (parent.children.size() + 1) / 2;
            Node pright;
            pright.leaf = false;
            pright.children.assign(parent.children.begin() + ccut, parent.children.end());
            pright.keys.assign(parent.keys.begin() + ccut, parent.keys.end());
            sep = parent.keys[ccut - 1];
            parent.children.resize(ccut);
            parent.keys.resize(ccut - 1);
            write_node(path.pages[level], parent);
            right_page = store_.allocate();
            write_node(right_page, pright);
        }

        Node new_root;
        new_root.leaf = false;
        new_root.children = {root_, right_page};
        new_root.keys = {sep};
        std::uint64_t new_root_page = store_.allocate();
        write_node(new_root_page, new_root);
        root_ = new_root_page;
        ++height_;
        write_header();
    }

    void write_node(std::uint64_t page, const Node& n) {
        std::uint8_t buf[kPageSize] = {};
        std::uint16_t count =
            static_cast<std::uint16_t>(n.leaf ? n.keys.size() : n.children.size());
        wire::put_u8(buf, n.leaf ? 0 : 1);
        wire::put_u16(buf + 1, count);
        std::uint8_t* p = buf + 3;
        if (n.leaf) {
            for (const auto& k : n.keys) {
                std::copy(k.bytes.begin(), k.bytes.end(), p);
                p += kCiphertextSize;
            }
        } else {
            require(n.children.size() == n.keys.size() + 1, Errc::corruption,
                    "index node arity");
            for (auto c : n.children) {
                wire::put_u64(p, c);
                p += 8;
            }
            for (const auto& k : n.keys) {
                std::copy(k.bytes.begin(), k.bytes.end(), p);
                p += kCiphertextSize;
            }
        }
        store_.write_page(page, std::span<const std::uint8_t>(buf, kPageSize));
    }

    void read_header() {
        std::uint8_t buf[kPageSize];
        require(store_.page_count() > 0, Errc::io, "empty page store");
        store_.read_page(0, std::span<std::uint8_t>(buf, kPageSize));
        require(wire::get_u32(buf) == kMagic, Errc::io, "bad b+tree page-file magic");
        branching_ = wire::get_u64(buf + 8);
        height_ = wire::get_u64(buf + 16);
        root_ = wire::get_u64(buf + 24);
        key_count_ = wire::get_u64(buf + 32);
        require(branching_ >= 2 && branching_ <= kPageDerivedBranching, Errc::corruption,
                "bad branching factor in header");
    }

    void write_header() {
        std::uint8_t buf[kPageSize] = {};
        wire::put_u32(buf, kMagic);
        wire::put_u32(buf + 4, 1);
        wire::put_u64(buf + 8, branching_);
        wire::put_u64(buf + 16, height_);
        wire::put_u64(buf + 24, root_);
        wire::put_u64(buf + 32, key_count_);
        store_.write_page(0, std::span<const std::uint8_t>(buf, kPageSize));
    }

    PageStore& store_;
    std::uint64_t branching_ = 0;
    std::uint64_t height_ = 0;
    std::uint64_t root_ = 0;
    std::uint64_t key_count_ = 0;
    unsigned group_bits_ = 1;
};

}  // namespace sope
