#pragma once

#include <random>
#include <set>
#include <vector>

#include "sope/geometry.hpp"
#include "sope/page_store.hpp"

namespace sope::bench {

inline constexpr Coord kWorkspaceSide = 1'000'000;

/// Uniform integer points over [0, 10^6)^d, deduplicated, ids 1..n.
inline std::vector<Point> uniform_points(std::size_t n, std::uint32_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::set<std::vector<Coord>> seen;
    std::vector<Point> out;
    out.reserve(n);
    while (out.size() < n) {
        std::vector<Coord> coords(d);
        for (auto& c : coords) c = static_cast<Coord>(rng() % kWorkspaceSide);
        if (!seen.insert(coords).second) continue;
        out.push_back({static_cast<PointId>(out.size() + 1), std::move(coords)});
    }
    return out;
}

struct Checkpoint {
    std::uint64_t inserted = 0;
    double seconds = 0;
    std::vector<std::pair<std::string, PageCounters>> counters;
    std::vector<std::pair<std::string, std::uint64_t>> pages;
};

/// Least-squares R^2 of y against x.
inline double linreg_r2(std::span<const double> xs, std::span<const double> ys) {
    std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    double cov = n * sxy - sx * sy;
    double vx = n * sxx - sx * sx;
    double vy = n * syy - sy * sy;
    if (vx == 0 || vy == 0) return 1.0;
    return (cov * cov) / (vx * vy);
}

}  // namespace sope::bench
