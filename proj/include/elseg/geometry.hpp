#pragma once

#include <array>
#include <vector>

#include "elseg/point.hpp"

namespace elseg::geometry {

/// Sign of the orientation determinant: +1 when a, b, c turn counter-clockwise, 0 when collinear.
int orient(const Point& a, const Point& b, const Point& c);

/// +1 when d lies strictly inside the circle through the counter-clockwise triangle a, b, c.
int incircle(const Point& a, const Point& b, const Point& c, const Point& d);

double circumradius(const Point& a, const Point& b, const Point& c);

struct Triangulation {
    /// Unique input points in first-occurrence order.
    std::vector<Point> points;
    /// Counter-clockwise index triples into points.
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> circumradius;
};

struct Polygon {
    /// Closed ring, counter-clockwise, first vertex not repeated.
    std::vector<Point> vertices;
    double area = 0.0;
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Shoelace signed area; positive for counter-clockwise rings.
double signed_area(const std::vector<Point>& ring);

Polygon make_polygon(std::vector<Point> ring);

/// True when no two non-adjacent edges intersect and no vertex repeats.
bool is_simple(const Polygon& poly);

/// Divide-and-conquer Delaunay triangulation over the deduplicated points.
/// Throws DegenerateGeometryError for fewer than 3 unique points or collinear input.
Triangulation delaunay(const std::vector<Point>& points);

/// Indices of triangles whose circumradius does not exceed 1/alpha.
std::vector<int> kept_triangles(const Triangulation& tri, double alpha);

/// Outer boundary rings of the kept triangles; hole rings are dropped.
std::vector<Polygon> alpha_shape(const Triangulation& tri, double alpha);
std::vector<Polygon> alpha_shape(const std::vector<Point>& points, double alpha);

/// Counter-clockwise hull without collinear boundary points.
Polygon convex_hull(const std::vector<Point>& points);

/// Inside or on the boundary of the ring.
bool contains(const Polygon& poly, const Point& p);

}  // namespace elseg::geometry
