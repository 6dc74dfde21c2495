#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/geometry.hpp"

namespace elseg::geometry {
namespace {

// Relative slack on the radius bound so that exact pixel distances (1, sqrt 2) survive rounding.
constexpr double kRadiusSlack = 1e-9;

using Edge = std::pair<int, int>;

/// Clockwise angle from direction a to direction b, in (0, 2*pi].
double clockwise_angle(double ax, double ay, double bx, double by) {
    const double a = std::atan2(ay, ax), b = std::atan2(by, bx);
    double d = a - b;
    while (d <= 0.0) {
        d += 2.0 * M_PI;
    }
    while (d > 2.0 * M_PI) {
        d -= 2.0 * M_PI;
    }
    return d;
}

std::vector<Point> merge_collinear(const std::vector<Point>& ring) {
    std::vector<Point> out = ring;
    bool changed = true;
    while (changed && out.size() > 3) {
        changed = false;
        for (std::size_t i = 0; i < out.size() && out.size() > 3; ++i) {
            const Point& prev = out[(i + out.size() - 1) % out.size()];
            const Point& next = out[(i + 1) % out.size()];
            if (orient(prev, out[i], next) == 0) {
                out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
                changed = true;
                break;
            }
        }
    }
    return out;
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) {
        return true;
    }
    auto on_segment = [](const Point& p, const Point& q, const Point& r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
               r.y <= std::max(p.y, q.y);
    };
    return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) || (o3 == 0 && on_segment(c, d, a)) ||
           (o4 == 0 && on_segment(c, d, b));
}

}  // namespace

double signed_area(const std::vector<Point>& ring) {
    double s = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % ring.size()];
        s += a.x * b.y - b.x * a.y;
    }
    return s / 2.0;
}

Polygon make_polygon(std::vector<Point> ring) {
    if (ring.size() < 3) {
        throw DegenerateGeometryError("polygon needs at least 3 vertices");
    }
    Polygon p;
    p.area = signed_area(ring);
    if (p.area < 0.0) {
        std::reverse(ring.begin(), ring.end());
        p.area = -p.area;
    }
    p.vertices = std::move(ring);
    return p;
}

bool is_simple(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) {
        return false;
    }
    std::set<Point> unique(v.begin(), v.end());
    if (unique.size() != n) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                continue;
            }
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
                return false;
            }
        }
    }
    return true;
}

std::vector<int> kept_triangles(const Triangulation& tri, double alpha) {
    if (!(alpha > 0.0)) {
        throw ArgumentError("alpha must be positive");
    }
    const double bound = (1.0 / alpha) * (1.0 + kRadiusSlack);
    std::vector<int> kept;
    for (std::size_t i = 0; i < tri.triangles.size(); ++i) {
        if (tri.circumradius[i] <= bound) {
            kept.push_back(static_cast<int>(i));
        }
    }
    return kept;
}

std::vector<Polygon> alpha_shape(const Triangulation& tri, double alpha) {
    const std::vector<int> kept = kept_triangles(tri, alpha);
    std::set<Edge> directed;
    for (int t : kept) {
        const auto& tr = tri.triangles[static_cast<std::size_t>(t)];
        for (int k = 0; k < 3; ++k) {
            directed.insert({tr[static_cast<std::size_t>(k)], tr[static_cast<std::size_t>((k + 1) % 3)]});
        }
    }
    // Boundary edges keep the kept region on their left.
    std::map<int, std::vector<int>> outgoing;
    std::size_t remaining = 0;
    for (const auto& [a, b] : directed) {
        if (!directed.count({b, a})) {
            outgoing[a].push_back(b);
            ++remaining;
        }
    }

    const auto& pts = tri.points;
    auto at = [&](int i) -> const Point& { return pts[static_cast<std::size_t>(i)]; };
    std::vector<Polygon> rings;
    int holes = 0;
    while (remaining > 0) {
        auto start_it = std::find_if(outgoing.begin(), outgoing.end(), [](const auto& kv) { return !kv.second.empty(); });
        const int start = start_it->first;
        std::vector<int> chain{start};
        int prev = start;
        int cur = start_it->second.front();
        start_it->second.erase(start_it->second.begin());
        --remaining;
        while (cur != start) {
            auto& outs = outgoing[cur];
            if (outs.empty()) {
                throw DegenerateGeometryError("alpha_shape: open boundary chain");
            }
            // Smallest clockwise turn from the reversed incoming edge stays on the same region.
            const double bx = at(prev).x - at(cur).x, by = at(prev).y - at(cur).y;
            std::size_t pick = 0;
            double best = 10.0;
            for (std::size_t k = 0; k < outs.size(); ++k) {
                const double ang = clockwise_angle(bx, by, at(outs[k]).x - at(cur).x, at(outs[k]).y - at(cur).y);
                if (ang < best) {
                    best = ang;
                    pick = k;
                }
            }
            chain.push_back(cur);
            prev = cur;
            cur = outs[pick];
            outs.erase(outs.begin() + static_cast<std::ptrdiff_t>(pick));
            --remaining;
        }
        std::vector<Point> ring;
        for (int i : chain) {
            ring.push_back(at(i));
        }
        if (signed_area(ring) <= 0.0) {
            ++holes;
            continue;
        }
        ring = merge_collinear(ring);
        rings.push_back(make_polygon(std::move(ring)));
    }
    if (holes > 0) {
        spdlog::debug("alpha_shape: dropped {} hole ring(s)", holes);
    }
    return rings;
}

std::vector<Polygon> alpha_shape(const std::vector<Point>& points, double alpha) {
    if (!(alpha > 0.0)) {
        throw ArgumentError("alpha must be positive");
    }
    return alpha_shape(delaunay(points), alpha);
}

Polygon convex_hull(const std::vector<Point>& points) {
    std::vector<Point> p = points;
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (p.size() < 3) {
        throw DegenerateGeometryError("convex_hull: fewer than 3 unique points");
    }
    // Andrew's monotone chain; pop on non-left turns drops collinear points.
    std::vector<Point> hull(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && orient(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && orient(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) {
        throw DegenerateGeometryError("convex_hull: all points are collinear");
    }
    return make_polygon(std::move(hull));
}

bool contains(const Polygon& poly, const Point& p) {
    const auto& v = poly.vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Point& a = v[i];
        const Point& b = v[j];
        if (orient(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
            std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y)) {
            return true;
        }
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            inside = !inside;
        }
    }
    return inside;
}

}  // namespace elseg::geometry
