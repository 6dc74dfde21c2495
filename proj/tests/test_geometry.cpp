#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "elseg/error.hpp"
#include "elseg/geometry.hpp"

namespace elseg::geometry {
namespace {

std::vector<Point> random_points(unsigned seed, int n, double extent = 100.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) {
        pts.push_back({u(gen), u(gen)});
    }
    return pts;
}

// Circumcentre in long double; independent of the library predicates.
bool circle_empty(const Point& a, const Point& b, const Point& c, const std::vector<Point>& all) {
    const long double ax = a.x, ay = a.y, bx = b.x, by = b.y, cx = c.x, cy = c.y;
    const long double d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    const long double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d;
    const long double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d;
    const long double r = std::hypot(ax - ux, ay - uy);
    for (const Point& p : all) {
        if (std::hypot(p.x - ux, p.y - uy) < r - 1e-9 * std::max<long double>(1, r)) {
            return false;
        }
    }
    return true;
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool proper_or_touching(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double d1 = cross(a, b, c), d2 = cross(a, b, d), d3 = cross(c, d, a), d4 = cross(c, d, b);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    auto on = [](const Point& p, const Point& q, const Point& r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
               r.y <= std::max(p.y, q.y);
    };
    return (d1 == 0 && on(a, b, c)) || (d2 == 0 && on(a, b, d)) || (d3 == 0 && on(c, d, a)) || (d4 == 0 && on(c, d, b));
}

// O(n^2) simplicity check written without the library.
bool brute_simple(const std::vector<Point>& v) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i + 1 || (i == 0 && j == n - 1)) {
                continue;
            }
            if (proper_or_touching(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
                return false;
            }
        }
    }
    return true;
}

double shoelace(const std::vector<Point>& v) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += v[i].x * v[(i + 1) % v.size()].y - v[(i + 1) % v.size()].x * v[i].y;
    }
    return s / 2;
}

double seg_dist(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    return std::hypot(p.x - a.x - t * dx, p.y - a.y - t * dy);
}

std::set<Point> vertex_set(const Polygon& p) { return {p.vertices.begin(), p.vertices.end()}; }

TEST(Predicates, OrientSigns) {
    EXPECT_EQ(orient({0, 0}, {1, 0}, {0, 1}), 1);
    EXPECT_EQ(orient({0, 0}, {0, 1}, {1, 0}), -1);
    EXPECT_EQ(orient({0, 0}, {1, 1}, {2, 2}), 0);
}

TEST(Predicates, ExactOnNearDegenerateInput) {
    // Points on y = x at non-integer offsets: naive doubles disagree with exact arithmetic.
    const Point a{0.5, 0.5}, b{12.0, 12.0}, c{24.0, 24.0};
    for (int i = 0; i < 64; ++i) {
        const Point p{0.5 + i * std::ldexp(1.0, -53), 0.5};
        const int s = orient(p, b, c);
        if (i == 0) {
            EXPECT_EQ(s, 0);
        } else {
            EXPECT_EQ(s, -orient(b, p, c));
            EXPECT_NE(s, 0);
        }
    }
    EXPECT_EQ(orient(a, b, c), 0);
}

TEST(Predicates, IncircleCocircularIsZero) {
    EXPECT_EQ(incircle({0, 0}, {1, 0}, {1, 1}, {0, 1}), 0);
    EXPECT_EQ(incircle({0.1, 0.1}, {1.1, 0.1}, {1.1, 1.1}, {0.1, 1.1}), 0);
    EXPECT_EQ(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}), 1);
    EXPECT_EQ(incircle({0, 0}, {1, 0}, {0, 1}, {3, 3}), -1);
}

TEST(Predicates, Circumradius) {
    EXPECT_NEAR(circumradius({0, 0}, {1, 0}, {0, 1}), std::sqrt(2.0) / 2, 1e-15);
    EXPECT_NEAR(circumradius({0, 0}, {2, 0}, {1, std::sqrt(3.0)}), 2 / std::sqrt(3.0), 1e-12);
    EXPECT_TRUE(std::isinf(circumradius({0, 0}, {1, 1}, {2, 2})));
}

TEST(Delaunay, UnitSquareGivesTwoTriangles) {
    const auto t = delaunay({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    ASSERT_EQ(t.triangles.size(), 2u);
    std::set<std::pair<int, int>> e0, e1;
    for (int k = 0; k < 3; ++k) {
        auto a = t.triangles[0][k], b = t.triangles[0][(k + 1) % 3];
        e0.insert({std::min(a, b), std::max(a, b)});
        a = t.triangles[1][k], b = t.triangles[1][(k + 1) % 3];
        e1.insert({std::min(a, b), std::max(a, b)});
    }
    std::vector<std::pair<int, int>> shared;
    std::set_intersection(e0.begin(), e0.end(), e1.begin(), e1.end(), std::back_inserter(shared));
    ASSERT_EQ(shared.size(), 1u);
    const auto [i, j] = shared[0];
    // The shared edge is a diagonal: its endpoints differ in both coordinates.
    EXPECT_NE(t.points[i].x, t.points[j].x);
    EXPECT_NE(t.points[i].y, t.points[j].y);
}

TEST(Delaunay, RandomPointsSatisfyEmptyCircle) {
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const auto pts = random_points(seed, 100);
        const auto t = delaunay(pts);
        const Polygon hull = convex_hull(pts);
        // Euler: 2n - 2 - h triangles for points in general position.
        EXPECT_EQ(t.triangles.size(), 2 * pts.size() - 2 - hull.vertices.size());
        double area = 0;
        for (const auto& tr : t.triangles) {
            const Point &a = t.points[tr[0]], &b = t.points[tr[1]], &c = t.points[tr[2]];
            EXPECT_GT(cross(a, b, c), 0.0);
            EXPECT_TRUE(circle_empty(a, b, c, t.points));
            area += cross(a, b, c) / 2;
        }
        EXPECT_NEAR(area, hull.area, 1e-9 * hull.area);
    }
}

TEST(Delaunay, PixelGridIsCompleteAndDelaunay) {
    std::vector<Point> pts;
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 13; ++x) {
            pts.push_back({double(x), double(y)});
        }
    }
    const auto t = delaunay(pts);
    EXPECT_EQ(t.triangles.size(), 2u * 12 * 8);
    for (std::size_t i = 0; i < t.triangles.size(); ++i) {
        const auto& tr = t.triangles[i];
        EXPECT_TRUE(circle_empty(t.points[tr[0]], t.points[tr[1]], t.points[tr[2]], t.points));
        EXPECT_NEAR(t.circumradius[i], std::sqrt(2.0) / 2, 1e-12);
    }
}

TEST(Delaunay, DeterministicAndDeduplicated) {
    auto pts = random_points(9, 60);
    pts.push_back(pts[3]);
    pts.push_back(pts[10]);
    const auto a = delaunay(pts);
    const auto b = delaunay(pts);
    EXPECT_EQ(a.triangles, b.triangles);
    EXPECT_EQ(a.points.size(), 60u);
    EXPECT_EQ(a.points[3], pts[3]);
}

TEST(Delaunay, DegenerateInputThrows) {
    EXPECT_THROW(delaunay({{0, 0}, {1, 1}, {2, 2}}), DegenerateGeometryError);
    EXPECT_THROW(delaunay({{0, 0}, {1, 1}, {0, 0}}), DegenerateGeometryError);
    EXPECT_THROW(delaunay({}), DegenerateGeometryError);
    EXPECT_NO_THROW(delaunay({{0, 0}, {1, 1}, {2, 2}, {0, 1}}));
}

TEST(Delaunay, CollinearRunPlusApex) {
    std::vector<Point> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({double(i), 0});
    pts.push_back({4.5, 3});
    const auto t = delaunay(pts);
    EXPECT_EQ(t.triangles.size(), 9u);
}

TEST(ConvexHull, SquareWithInteriorPoint) {
    const Polygon h = convex_hull({{0, 0}, {4, 0}, {4, 4}, {0, 4}, {2, 2}, {2, 0}});
    EXPECT_EQ(h.vertices.size(), 4u);
    EXPECT_DOUBLE_EQ(h.area, 16.0);
    EXPECT_GT(shoelace(h.vertices), 0.0);
}

TEST(ConvexHull, MatchesBruteForceLeftOfEdges) {
    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto pts = random_points(100 + seed, 200);
        const Polygon h = convex_hull(pts);
        const auto& v = h.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point &a = v[i], &b = v[(i + 1) % v.size()];
            for (const Point& p : pts) {
                EXPECT_GE(cross(a, b, p), -1e-9);
            }
            EXPECT_GT(cross(a, b, v[(i + 2) % v.size()]), 0.0);
            EXPECT_NE(std::find(pts.begin(), pts.end(), a), pts.end());
        }
    }
    EXPECT_THROW(convex_hull({{0, 0}, {1, 1}, {3, 3}}), DegenerateGeometryError);
}

TEST(AlphaShape, TwoByTwoBlockIsUnitSquare) {
    const auto polys = alpha_shape({{5, 5}, {6, 5}, {5, 6}, {6, 6}}, std::sqrt(2.0));
    ASSERT_EQ(polys.size(), 1u);
    EXPECT_EQ(vertex_set(polys[0]), (std::set<Point>{{5, 5}, {6, 5}, {5, 6}, {6, 6}}));
    EXPECT_DOUBLE_EQ(polys[0].area, 1.0);
}

TEST(AlphaShape, TinyAlphaEqualsConvexHull) {
    for (unsigned seed = 0; seed < 20; ++seed) {
        const auto pts = random_points(500 + seed, 40 + 5 * static_cast<int>(seed));
        const auto polys = alpha_shape(pts, 1e-9);
        ASSERT_EQ(polys.size(), 1u);
        const Polygon hull = convex_hull(pts);
        EXPECT_EQ(vertex_set(polys[0]), vertex_set(hull));
        EXPECT_NEAR(polys[0].area, hull.area, 1e-9 * hull.area);
    }
}

TEST(AlphaShape, MonotoneFiltration) {
    const double alphas[] = {0.1, 0.5, 1.0, std::sqrt(2.0)};
    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto t = delaunay(random_points(seed, 150, 20.0));
        for (int i = 0; i + 1 < 4; ++i) {
            const auto loose = kept_triangles(t, alphas[i]);
            const auto tight = kept_triangles(t, alphas[i + 1]);
            EXPECT_TRUE(std::includes(loose.begin(), loose.end(), tight.begin(), tight.end()));
        }
    }
}

TEST(AlphaShape, PinchSplitsIntoSimpleRings) {
    const std::vector<Point> pts{{0, 0}, {1, 0}, {0.5, 0.8}, {2, 0}, {1.5, -0.8}};
    const auto polys = alpha_shape(pts, 1 / 0.6);
    ASSERT_EQ(polys.size(), 2u);
    for (const auto& p : polys) {
        EXPECT_EQ(p.vertices.size(), 3u);
        EXPECT_TRUE(brute_simple(p.vertices));
        EXPECT_TRUE(is_simple(p));
    }
}

TEST(AlphaShape, HoleRingsDropped) {
    std::vector<Point> pts;
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            if (x < 3 || x > 6 || y < 3 || y > 6) pts.push_back({double(x), double(y)});
        }
    }
    const auto polys = alpha_shape(pts, std::sqrt(2.0));
    ASSERT_EQ(polys.size(), 1u);
    EXPECT_DOUBLE_EQ(polys[0].area, 81.0);
    EXPECT_EQ(polys[0].vertices.size(), 4u);
}

TEST(AlphaShape, DiskContourWithinOnePixel) {
    const double cx = 20.3, cy = 19.6, r = 9.5;
    std::vector<Point> pts;
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (std::hypot(x - cx, y - cy) <= r) pts.push_back({double(x), double(y)});
        }
    }
    const auto polys = alpha_shape(pts, std::sqrt(2.0));
    ASSERT_EQ(polys.size(), 1u);
    const auto& v = polys[0].vertices;
    double worst = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point &a = v[i], &b = v[(i + 1) % v.size()];
        for (int s = 0; s <= 10; ++s) {
            const Point p{a.x + (b.x - a.x) * s / 10, a.y + (b.y - a.y) * s / 10};
            worst = std::max(worst, std::fabs(std::hypot(p.x - cx, p.y - cy) - r));
        }
    }
    for (int k = 0; k < 720; ++k) {
        const double th = k * M_PI / 360;
        const Point q{cx + r * std::cos(th), cy + r * std::sin(th)};
        double best = 1e9;
        for (std::size_t i = 0; i < v.size(); ++i) best = std::min(best, seg_dist(q, v[i], v[(i + 1) % v.size()]));
        worst = std::max(worst, best);
    }
    EXPECT_LE(worst, 1.0);
    EXPECT_TRUE(brute_simple(v));
    EXPECT_GT(shoelace(v), 0.0);
}

// Blobs built from 2x2 stamps: every pixel belongs to a filled 2x2 block.
TEST(AlphaShape, StampedBlobPixelsInsideRings) {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 25; ++trial) {
        std::set<Point> blob;
        int x = 20, y = 20;
        for (int s = 0; s < 40; ++s) {
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) blob.insert({double(x + dx), double(y + dy)});
            x += static_cast<int>(gen() % 3) - 1;
            y += static_cast<int>(gen() % 3) - 1;
        }
        const std::vector<Point> pts(blob.begin(), blob.end());
        const auto polys = alpha_shape(pts, std::sqrt(2.0));
        ASSERT_FALSE(polys.empty());
        for (const Point& p : pts) {
            EXPECT_TRUE(std::any_of(polys.begin(), polys.end(), [&](const Polygon& g) { return contains(g, p); }))
                << "trial " << trial << " pixel " << p.x << "," << p.y;
        }
        const double hull_area = convex_hull(pts).area;
        double total = 0;
        for (const auto& g : polys) {
            EXPECT_TRUE(brute_simple(g.vertices));
            EXPECT_NEAR(shoelace(g.vertices), g.area, 1e-9);
            EXPECT_GT(g.area, 0.0);
            total += g.area;
        }
        EXPECT_LE(total, hull_area + 1e-9);
    }
}

TEST(AlphaShape, BoundaryEdgeParity) {
    const auto t = delaunay(random_points(3, 120, 15.0));
    const auto kept = kept_triangles(t, 0.5);
    std::map<std::pair<int, int>, int> uses;
    for (int i : kept) {
        const auto& tr = t.triangles[i];
        for (int k = 0; k < 3; ++k) {
            const int a = tr[k], b = tr[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    }
    for (const auto& [e, n] : uses) {
        EXPECT_TRUE(n == 1 || n == 2);
    }
}

TEST(AlphaShape, NoSurvivorsGivesEmptyAndBadAlphaThrows) {
    EXPECT_TRUE(alpha_shape({{0, 0}, {10, 0}, {0, 10}}, 1.0).empty());
    EXPECT_THROW(alpha_shape({{0, 0}, {1, 0}, {0, 1}}, 0.0), ArgumentError);
    EXPECT_THROW(alpha_shape({{0, 0}, {1, 0}, {2, 0}}, 1.0), DegenerateGeometryError);
}

TEST(Polygon, ContainsIncludesBoundary) {
    const Polygon sq = make_polygon({{0, 0}, {0, 2}, {2, 2}, {2, 0}});
    EXPECT_GT(signed_area(sq.vertices), 0.0);
    EXPECT_TRUE(contains(sq, {1, 1}));
    EXPECT_TRUE(contains(sq, {2, 1}));
    EXPECT_TRUE(contains(sq, {0, 0}));
    EXPECT_FALSE(contains(sq, {2.01, 1}));
    EXPECT_FALSE(is_simple(make_polygon({{0, 0}, {2, 2}, {2, 0}, {0, 2}})));
}

}  // namespace
}  // namespace elseg::geometry
