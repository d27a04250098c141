#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "sope/geometry.hpp"

// Brute-force plaintext reference implementations of every query, used as
// ground truth by the test and acceptance suites. Each is the literal
// definition, O(n^2) or worse; none of them ever touches a tree. Compiled
// into the harnesses only.

namespace sope::oracle {

using PlainDataset = std::vector<Point>;

inline bool point(const PlainDataset& ds, std::span<const Coord> q) {
    for (const Point& p : ds)
        if (std::equal(q.begin(), q.end(), p.coords.begin(), p.coords.end())) return true;
    return false;
}

inline std::set<PointId> range(const PlainDataset& ds, const Rect& box) {
    std::set<PointId> out;
    for (const Point& p : ds)
        if (box.contains(p.coords)) out.insert(p.id);
    return out;
}

inline std::set<PointId> skyline(const PlainDataset& ds) {
    std::set<PointId> out;
    for (const Point& p : ds) {
        bool dominated = false;
        for (const Point& r : ds)
            if (r.id != p.id && dominates_min(r.coords, p.coords)) {
                dominated = true;
                break;
            }
        if (!dominated) out.insert(p.id);
    }
    return out;
}

inline std::set<PointId> constrained_skyline(const PlainDataset& ds, const Rect& box) {
    PlainDataset filtered;
    for (const Point& p : ds)
        if (box.contains(p.coords)) filtered.push_back(p);
    return skyline(filtered);
}

/// Layer peeling: layer i is the global skyline of what remains after
/// removing layers 0..i-1.
inline std::vector<std::set<PointId>> k_global_skyline(const PlainDataset& ds,
                                                       std::span<const Coord> q,
                                                       std::size_t k) {
    std::vector<std::set<PointId>> layers;
    std::vector<const Point*> remaining;
    for (const Point& p : ds) remaining.push_back(&p);
    for (std::size_t i = 0; i < k && !remaining.empty(); ++i) {
        std::set<PointId> layer;
        std::vector<const Point*> dominated;
        for (const Point* p : remaining) {
            bool dom = false;
            for (const Point* r : remaining)
                if (r != p && globally_dominates(r->coords, p->coords, q)) {
                    dom = true;
                    break;
                }
            if (dom)
                dominated.push_back(p);
            else
                layer.insert(p->id);
        }
        layers.push_back(std::move(layer));
        remaining = std::move(dominated);
    }
    while (layers.size() < k) layers.emplace_back();
    return layers;
}

inline std::set<PointId> global_skyline(const PlainDataset& ds, std::span<const Coord> q) {
    return k_global_skyline(ds, q, 1).front();
}

inline std::vector<std::set<PointId>> constrained_k_global_skyline(const PlainDataset& ds,
                                                                   const Rect& box,
                                                                   std::span<const Coord> q,
                                                                   std::size_t k) {
    PlainDataset filtered;
    for (const Point& p : ds)
        if (box.contains(p.coords)) filtered.push_back(p);
    return k_global_skyline(filtered, q, k);
}

inline std::set<PointId> dynamic_skyline(const PlainDataset& ds, std::span<const Coord> q) {
    std::set<PointId> out;
    for (const Point& p : ds) {
        bool dominated = false;
        for (const Point& r : ds)
            if (r.id != p.id && dynamically_dominates(r.coords, p.coords, q)) {
                dominated = true;
                break;
            }
        if (!dominated) out.insert(p.id);
    }
    return out;
}

/// k nearest by (squared distance, id); every point when k >= n.
inline std::vector<PointId> knn(const PlainDataset& ds, std::span<const Coord> q,
                                std::size_t k, bool include_kth_ties = false) {
    std::vector<std::pair<u128, PointId>> scored;
    for (const Point& p : ds) scored.emplace_back(distance_sq(p.coords, q), p.id);
    std::sort(scored.begin(), scored.end());
    if (scored.size() > k) {
        std::size_t end = k;
        if (include_kth_ties)
            while (end < scored.size() && scored[end].first == scored[k - 1].first) ++end;
        scored.resize(end);
    }
    std::vector<PointId> out;
    for (auto& [d, id] : scored) out.push_back(id);
    return out;
}

inline std::vector<PointId> constrained_knn(const PlainDataset& ds, const Rect& box,
                                            std::span<const Coord> q, std::size_t k) {
    PlainDataset filtered;
    for (const Point& p : ds)
        if (box.contains(p.coords)) filtered.push_back(p);
    return knn(filtered, q, k);
}

/// p is a reverse k-nearest neighbour of q iff fewer than k points are
/// strictly closer to p than q is.
inline std::set<PointId> reverse_knn(const PlainDataset& ds, std::span<const Coord> q,
                                     std::size_t k) {
    std::set<PointId> out;
    for (const Point& p : ds) {
        std::size_t closer = 0;
        u128 dq = distance_sq(p.coords, q);
        for (const Point& r : ds) {
            if (r.id == p.id) continue;
            if (distance_sq(p.coords, r.coords) < dq) ++closer;
        }
        if (closer < k) out.insert(p.id);
    }
    return out;
}

inline std::set<PointId> nn_ids_at(const PlainDataset& ds, std::span<const double> coords) {
    std::set<PointId> best;
    long double best_d = 0;
    for (const Point& p : ds) {
        long double d2 = 0;
        for (std::size_t i = 0; i < coords.size(); ++i) {
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
    }
    return best;
}

struct NNTile {
    PointId nn;
    double t0, t1;
};

/// Exact tiling via a parameter grid refined with the bisector intersections
/// of every pair of grid winners.
inline std::vector<NNTile> continuous_1nn(const PlainDataset& ds, const Segment& seg,
                                          std::size_t grid = 512) {
    if (ds.empty()) return {};
    auto point_at = [&](double t) {
        std::vector<double> c(seg.a.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = static_cast<double>(seg.a[i]) +
                   t * (static_cast<double>(seg.b[i]) - static_cast<double>(seg.a[i]));
        return c;
    };

    std::set<PointId> winners;
    for (std::size_t g = 0; g <= grid; ++g) {
        auto ids = nn_ids_at(ds, point_at(double(g) / double(grid)));
        winners.insert(ids.begin(), ids.end());
    }
    std::vector<const Point*> wp;
    for (const Point& p : ds)
        if (winners.count(p.id)) wp.push_back(&p);

    std::vector<double> cuts{0.0, 1.0};
    for (std::size_t i = 0; i < wp.size(); ++i)
        for (std::size_t j = i + 1; j < wp.size(); ++j)
            if (auto t = bisector_split(wp[i]->coords, wp[j]->coords, seg)) cuts.push_back(*t);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());

    std::vector<NNTile> tiles;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double mid = (cuts[i] + cuts[i + 1]) / 2;
        PointId nn = *nn_ids_at(ds, point_at(mid)).begin();
        if (!tiles.empty() && tiles.back().nn == nn)
            tiles.back().t1 = cuts[i + 1];
        else
            tiles.push_back({nn, cuts[i], cuts[i + 1]});
    }
    return tiles;
}

}  // namespace sope::oracle
