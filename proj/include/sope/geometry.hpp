#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "sope/common.hpp"

namespace sope {

struct Point {
    PointId id = 0;
    std::vector<Coord> coords;
};

// Closed on both ends per axis.
struct Rect {
    std::vector<Coord> lo;
    std::vector<Coord> hi;

    static Rect normalized(std::span<const Coord> a, std::span<const Coord> b) {
        require(a.size() == b.size() && !a.empty(), Errc::dimension_mismatch, "rect corners");
        Rect r;
        r.lo.resize(a.size());
        r.hi.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            r.lo[i] = std::min(a[i], b[i]);
            r.hi[i] = std::max(a[i], b[i]);
        }
        return r;
    }

    bool contains(std::span<const Coord> p) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }
};

struct Segment {
    std::vector<Coord> a;
    std::vector<Coord> b;
};

namespace detail {

inline void check_dims(std::span<const Coord> a, std::span<const Coord> b) {
    require(a.size() == b.size() && !a.empty(), Errc::dimension_mismatch, "coordinate arity");
}

inline std::uint64_t abs_diff(Coord a, Coord b) {
    return a >= b ? static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b)
                  : static_cast<std::uint64_t>(b) - static_cast<std::uint64_t>(a);
}

}  // namespace detail

/// Min-condition dominance: p <= r on every axis, strictly smaller on one.
inline bool dominates_min(std::span<const Coord> p, std::span<const Coord> r) {
    detail::check_dims(p, r);
    bool strict = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > r[i]) return false;
        if (p[i] < r[i]) strict = true;
    }
    return strict;
}

/// Global domination of r by p w.r.t. q: same open quadrant, p per-axis at
/// least as close to q, strictly closer on some axis.
inline bool globally_dominates(std::span<const Coord> p, std::span<const Coord> r,
                               std::span<const Coord> q) {
    detail::check_dims(p, r);
    detail::check_dims(p, q);
    bool strict = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        // sign test instead of the product (p_i-q_i)(r_i-q_i): exact for any int64
        int a = p[i] > q[i] ? 1 : p[i] < q[i] ? -1 : 0;
        int b = r[i] > q[i] ? 1 : r[i] < q[i] ? -1 : 0;
        if (a == 0 || a != b) return false;
        std::uint64_t dp = detail::abs_diff(p[i], q[i]);
        std::uint64_t dr = detail::abs_diff(r[i], q[i]);
        if (dp > dr) return false;
        if (dp < dr) strict = true;
    }
    return strict;
}

/// Global domination of a whole rectangle: evaluated against the vertex of er
/// closest to q (per-axis clamp of q into [lo,hi]).
inline bool globally_dominates_rect(std::span<const Coord> p, const Rect& er,
                                    std::span<const Coord> q) {
    require(er.lo.size() == q.size(), Errc::dimension_mismatch, "rect arity");
    std::vector<Coord> closest(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        closest[i] = std::clamp(q[i], er.lo[i], er.hi[i]);
    return globally_dominates(p, closest, q);
}

/// Dynamic domination (per-axis absolute distances to q).
inline bool dynamically_dominates(std::span<const Coord> p, std::span<const Coord> r,
                                  std::span<const Coord> q) {
    detail::check_dims(p, r);
    detail::check_dims(p, q);
    bool strict = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::uint64_t dp = detail::abs_diff(p[i], q[i]);
        std::uint64_t dr = detail::abs_diff(r[i], q[i]);
        if (dp > dr) return false;
        if (dp < dr) strict = true;
    }
    return strict;
}

/// Exact squared Euclidean distance. All distance comparisons in the codebase
/// are done on squared values.
inline u128 distance_sq(std::span<const Coord> p, std::span<const Coord> q) {
    detail::check_dims(p, q);
    u128 sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        u128 d = detail::abs_diff(p[i], q[i]);
        sum += d * d;
    }
    return sum;
}

inline double distance_sq_real(std::span<const double> p, std::span<const Coord> q) {
    double sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - static_cast<double>(q[i]);
        sum += d * d;
    }
    return sum;
}

inline constexpr double kSplitParamTolerance = 1e-9;

/// Parameter t of the intersection of seg with the perpendicular bisector
/// hyperplane of [nna, nnb], when it falls strictly inside (0,1). Returned as
/// a parameter so the continuous-NN recursion never accumulates rounding in
/// coordinates.
inline std::optional<double> bisector_split(std::span<const Coord> nna,
                                            std::span<const Coord> nnb, const Segment& seg) {
    detail::check_dims(nna, nnb);
    require(seg.a.size() == nna.size() && seg.b.size() == nna.size(), Errc::dimension_mismatch,
            "segment arity");
    bool same = true;
    for (std::size_t i = 0; i < nna.size(); ++i)
        if (nna[i] != nnb[i]) same = false;
    require(!same, Errc::bad_param, "bisector of coincident points");

    // plane: x . n = m . n, with n = nnb-nna and m the midpoint
    double denom = 0, num = 0, scale = 0;
    for (std::size_t i = 0; i < nna.size(); ++i) {
        double n = static_cast<double>(nnb[i]) - static_cast<double>(nna[i]);
        double dir = static_cast<double>(seg.b[i]) - static_cast<double>(seg.a[i]);
        double m = (static_cast<double>(nna[i]) + static_cast<double>(nnb[i])) / 2.0;
        denom += dir * n;
        num += (m - static_cast<double>(seg.a[i])) * n;
        scale += std::abs(dir * n);
    }
    if (scale == 0 || std::abs(denom) <= scale * 1e-15) return std::nullopt;
    double t = num / denom;
    if (t <= kSplitParamTolerance || t >= 1.0 - kSplitParamTolerance) return std::nullopt;
    return t;
}

}  // namespace sope
