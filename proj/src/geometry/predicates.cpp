#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "elseg/geometry.hpp"

namespace elseg::geometry {
namespace {

using boost::multiprecision::cpp_rational;

// Forward error bounds for the plain double evaluation (Shewchuk's stage-A constants).
constexpr double kOrientBound = 3.3306690738754716e-16;
constexpr double kIncircleBound = 1.1102230246251577e-15;

// Integer coordinates up to this magnitude keep every incircle term inside 128 bits.
constexpr double kSmallInt = 1048576.0;

template <class T>
int sign(const T& v) {
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool small_int(double v) { return std::floor(v) == v && std::fabs(v) <= kSmallInt; }

template <class... P>
bool all_small_int(const P&... p) {
    return ((small_int(p.x) && small_int(p.y)) && ...);
}

template <class T>
int orient_exact(const Point& a, const Point& b, const Point& c) {
    const T ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    const T det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    return sign(det);
}

template <class T>
int incircle_exact(const Point& a, const Point& b, const Point& c, const Point& d) {
    const T adx = T(a.x) - T(d.x), ady = T(a.y) - T(d.y);
    const T bdx = T(b.x) - T(d.x), bdy = T(b.y) - T(d.y);
    const T cdx = T(c.x) - T(d.x), cdy = T(c.y) - T(d.y);
    const T alift = adx * adx + ady * ady;
    const T blift = bdx * bdx + bdy * bdy;
    const T clift = cdx * cdx + cdy * cdy;
    const T det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
    return sign(det);
}

}  // namespace

int orient(const Point& a, const Point& b, const Point& c) {
    const double l = (b.x - a.x) * (c.y - a.y);
    const double r = (b.y - a.y) * (c.x - a.x);
    const double det = l - r;
    if (std::fabs(det) > kOrientBound * (std::fabs(l) + std::fabs(r))) {
        return sign(det);
    }
    if (all_small_int(a, b, c)) {
        return orient_exact<__int128>(a, b, c);
    }
    return orient_exact<cpp_rational>(a, b, c);
}

int incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;
    const double bc = bdx * cdy - cdx * bdy;
    const double ca = cdx * ady - adx * cdy;
    const double ab = adx * bdy - bdx * ady;
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;
    const double det = alift * bc + blift * ca + clift * ab;
    const double permanent = (std::fabs(bdx * cdy) + std::fabs(cdx * bdy)) * alift +
                             (std::fabs(cdx * ady) + std::fabs(adx * cdy)) * blift +
                             (std::fabs(adx * bdy) + std::fabs(bdx * ady)) * clift;
    if (std::fabs(det) > kIncircleBound * permanent) {
        return sign(det);
    }
    if (all_small_int(a, b, c, d)) {
        return incircle_exact<__int128>(a, b, c, d);
    }
    return incircle_exact<cpp_rational>(a, b, c, d);
}

double circumradius(const Point& a, const Point& b, const Point& c) {
    const double ab = std::hypot(b.x - a.x, b.y - a.y);
    const double bc = std::hypot(c.x - b.x, c.y - b.y);
    const double ca = std::hypot(a.x - c.x, a.y - c.y);
    const double twice_area = std::fabs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    if (twice_area == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return ab * bc * ca / (2.0 * twice_area);
}

}  // namespace elseg::geometry
