#include <algorithm>
#include <map>
#include <numeric>

#include "elseg/error.hpp"
#include "elseg/geometry.hpp"

namespace elseg::geometry {
namespace {

/// Quad-edge store. Edge e = 4*q + r; r = 0, 2 are the primal directions, 1, 3 the duals.
class QuadEdges {
public:
    explicit QuadEdges(const std::vector<Point>& pts) : pts_(pts) {}

    static int rot(int e) { return (e & ~3) | ((e + 1) & 3); }
    static int sym(int e) { return (e & ~3) | ((e + 2) & 3); }
    static int rot_inv(int e) { return (e & ~3) | ((e + 3) & 3); }

    int onext(int e) const { return next_[static_cast<std::size_t>(e)]; }
    int oprev(int e) const { return rot(onext(rot(e))); }
    int lnext(int e) const { return rot(onext(rot_inv(e))); }
    int rprev(int e) const { return onext(sym(e)); }

    int org(int e) const { return org_[static_cast<std::size_t>(e)]; }
    int dest(int e) const { return org(sym(e)); }
    const Point& p(int v) const { return pts_[static_cast<std::size_t>(v)]; }

    int make_edge(int a, int b) {
        const int q = static_cast<int>(next_.size());
        next_.insert(next_.end(), {q, q + 3, q + 2, q + 1});
        org_.insert(org_.end(), {a, -1, b, -1});
        alive_.push_back(1);
        return q;
    }

    void splice(int a, int b) {
        const int alpha = rot(onext(a));
        const int beta = rot(onext(b));
        std::swap(next_[static_cast<std::size_t>(a)], next_[static_cast<std::size_t>(b)]);
        std::swap(next_[static_cast<std::size_t>(alpha)], next_[static_cast<std::size_t>(beta)]);
    }

    int connect(int a, int b) {
        const int e = make_edge(dest(a), org(b));
        splice(e, lnext(a));
        splice(sym(e), b);
        return e;
    }

    void remove(int e) {
        splice(e, oprev(e));
        splice(sym(e), oprev(sym(e)));
        alive_[static_cast<std::size_t>(e >> 2)] = 0;
    }

    bool alive(int e) const { return alive_[static_cast<std::size_t>(e >> 2)] != 0; }
    int edge_slots() const { return static_cast<int>(next_.size()); }

private:
    const std::vector<Point>& pts_;
    std::vector<int> next_;
    std::vector<int> org_;
    std::vector<char> alive_;
};

class Builder {
public:
    Builder(QuadEdges& q, const std::vector<int>& order) : q_(q), order_(order) {}

    /// Returns the counter-clockwise hull edge out of the leftmost vertex and
    /// the clockwise hull edge out of the rightmost vertex.
    std::pair<int, int> build(std::size_t lo, std::size_t hi) {
        const std::size_t n = hi - lo;
        if (n == 2) {
            const int a = q_.make_edge(v(lo), v(lo + 1));
            return {a, QuadEdges::sym(a)};
        }
        if (n == 3) {
            const int s1 = v(lo), s2 = v(lo + 1), s3 = v(lo + 2);
            const int a = q_.make_edge(s1, s2);
            const int b = q_.make_edge(s2, s3);
            q_.splice(QuadEdges::sym(a), b);
            const int turn = orient(q_.p(s1), q_.p(s2), q_.p(s3));
            if (turn > 0) {
                q_.connect(b, a);
                return {a, QuadEdges::sym(b)};
            }
            if (turn < 0) {
                const int c = q_.connect(b, a);
                return {QuadEdges::sym(c), c};
            }
            return {a, QuadEdges::sym(b)};
        }

        const std::size_t mid = lo + n / 2;
        auto [ldo, ldi] = build(lo, mid);
        auto [rdi, rdo] = build(mid, hi);

        // Lower common tangent.
        for (;;) {
            if (left_of(q_.org(rdi), ldi)) {
                ldi = q_.lnext(ldi);
            } else if (right_of(q_.org(ldi), rdi)) {
                rdi = q_.rprev(rdi);
            } else {
                break;
            }
        }
        int basel = q_.connect(QuadEdges::sym(rdi), ldi);
        if (q_.org(ldi) == q_.org(ldo)) {
            ldo = QuadEdges::sym(basel);
        }
        if (q_.org(rdi) == q_.org(rdo)) {
            rdo = basel;
        }

        // Zip upward.
        for (;;) {
            int lcand = q_.onext(QuadEdges::sym(basel));
            if (valid(lcand, basel)) {
                while (in_circle(q_.dest(basel), q_.org(basel), q_.dest(lcand), q_.dest(q_.onext(lcand)))) {
                    const int t = q_.onext(lcand);
                    q_.remove(lcand);
                    lcand = t;
                }
            }
            int rcand = q_.oprev(basel);
            if (valid(rcand, basel)) {
                while (in_circle(q_.dest(basel), q_.org(basel), q_.dest(rcand), q_.dest(q_.oprev(rcand)))) {
                    const int t = q_.oprev(rcand);
                    q_.remove(rcand);
                    rcand = t;
                }
            }
            const bool lv = valid(lcand, basel), rv = valid(rcand, basel);
            if (!lv && !rv) {
                break;
            }
            if (!lv || (rv && in_circle(q_.dest(lcand), q_.org(lcand), q_.org(rcand), q_.dest(rcand)))) {
                basel = q_.connect(rcand, QuadEdges::sym(basel));
            } else {
                basel = q_.connect(QuadEdges::sym(basel), QuadEdges::sym(lcand));
            }
        }
        return {ldo, rdo};
    }

private:
    int v(std::size_t i) const { return order_[i]; }
    bool ccw(int a, int b, int c) const { return orient(q_.p(a), q_.p(b), q_.p(c)) > 0; }
    bool left_of(int x, int e) const { return ccw(x, q_.org(e), q_.dest(e)); }
    bool right_of(int x, int e) const { return ccw(x, q_.dest(e), q_.org(e)); }
    bool valid(int e, int basel) const { return right_of(q_.dest(e), basel); }
    bool in_circle(int a, int b, int c, int d) const {
        return incircle(q_.p(a), q_.p(b), q_.p(c), q_.p(d)) > 0;
    }

    QuadEdges& q_;
    const std::vector<int>& order_;
};

}  // namespace

Triangulation delaunay(const std::vector<Point>& points) {
    Triangulation tri;
    std::map<Point, int> seen;
    for (const Point& p : points) {
        if (seen.emplace(p, static_cast<int>(tri.points.size())).second) {
            tri.points.push_back(p);
        }
    }
    const auto& pts = tri.points;
    if (pts.size() < 3) {
        throw DegenerateGeometryError("delaunay: " + std::to_string(pts.size()) + " unique point(s), need 3");
    }
    bool collinear = true;
    for (std::size_t i = 2; i < pts.size() && collinear; ++i) {
        collinear = orient(pts[0], pts[1], pts[i]) == 0;
    }
    if (collinear) {
        throw DegenerateGeometryError("delaunay: all points are collinear");
    }

    std::vector<int> order;
    order.reserve(seen.size());
    for (const auto& [p, idx] : seen) {
        order.push_back(idx);  // map iteration is sorted by (x, y)
    }
    QuadEdges q(pts);
    Builder(q, order).build(0, order.size());

    // Each interior face appears as a counter-clockwise lnext cycle of length 3.
    std::vector<char> done(static_cast<std::size_t>(q.edge_slots()), 0);
    for (int e = 0; e < q.edge_slots(); e += 2) {
        if (!q.alive(e) || done[static_cast<std::size_t>(e)]) {
            continue;
        }
        const int b = q.lnext(e), c = q.lnext(b);
        if (q.lnext(c) != e) {
            continue;
        }
        done[static_cast<std::size_t>(e)] = done[static_cast<std::size_t>(b)] = done[static_cast<std::size_t>(c)] = 1;
        const int i = q.org(e), j = q.org(b), k = q.org(c);
        if (orient(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], pts[static_cast<std::size_t>(k)]) <= 0) {
            continue;
        }
        std::array<int, 3> t{i, j, k};
        std::rotate(t.begin(), std::min_element(t.begin(), t.end()), t.end());
        tri.triangles.push_back(t);
    }
    std::sort(tri.triangles.begin(), tri.triangles.end());
    for (const auto& t : tri.triangles) {
        tri.circumradius.push_back(circumradius(pts[static_cast<std::size_t>(t[0])], pts[static_cast<std::size_t>(t[1])],
                                                pts[static_cast<std::size_t>(t[2])]));
    }
    return tri;
}

}  // namespace elseg::geometry
