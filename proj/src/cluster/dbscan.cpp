#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>

#include "elseg/cluster.hpp"
#include "elseg/error.hpp"

namespace elseg::cluster {
namespace {

constexpr int kUnvisited = -2;
constexpr int kNoise = -1;

bool near(const Point& a, const Point& b, double eps2) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy < eps2;
}

/// Uniform grid with cell side epsilon; a query inspects the 3x3 block around the cell.
class Grid {
public:
    Grid(const std::vector<Point>& pts, double eps) : pts_(pts), eps_(eps), eps2_(eps * eps) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            cells_[key(cell(pts[i].x), cell(pts[i].y))].push_back(i);
        }
    }

    void query(std::size_t i, std::vector<std::size_t>& out) const {
        out.clear();
        const std::int64_t cx = cell(pts_[i].x), cy = cell(pts_[i].y);
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                auto it = cells_.find(key(cx + dx, cy + dy));
                if (it == cells_.end()) {
                    continue;
                }
                for (std::size_t j : it->second) {
                    if (near(pts_[i], pts_[j], eps2_)) {
                        out.push_back(j);
                    }
                }
            }
        }
    }

private:
    std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / eps_)); }
    static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
        return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
    }

    const std::vector<Point>& pts_;
    double eps_;
    double eps2_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

class Brute {
public:
    Brute(const std::vector<Point>& pts, double eps) : pts_(pts), eps2_(eps * eps) {}

    void query(std::size_t i, std::vector<std::size_t>& out) const {
        out.clear();
        for (std::size_t j = 0; j < pts_.size(); ++j) {
            if (near(pts_[i], pts_[j], eps2_)) {
                out.push_back(j);
            }
        }
    }

private:
    const std::vector<Point>& pts_;
    double eps2_;
};

template <class Index>
ClusterSet run(const std::vector<Point>& pts, const DbscanParams& p, const Index& index) {
    const std::size_t n = pts.size();
    const auto min_pts = static_cast<std::size_t>(p.min_pts);
    std::vector<int> label(n, kUnvisited);
    std::vector<char> core(n, 0);
    std::vector<std::size_t> nb, nb2;
    int next = 0;

    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) {
            continue;
        }
        index.query(i, nb);
        if (nb.size() < min_pts) {
            label[i] = kNoise;
            continue;
        }
        const int id = next++;
        label[i] = id;
        core[i] = 1;
        std::deque<std::size_t> frontier(nb.begin(), nb.end());
        while (!frontier.empty()) {
            const std::size_t j = frontier.front();
            frontier.pop_front();
            if (label[j] == kNoise) {
                label[j] = id;  // noise reached from a core point becomes border
            }
            if (label[j] != kUnvisited) {
                continue;
            }
            label[j] = id;
            index.query(j, nb2);
            if (nb2.size() >= min_pts) {
                core[j] = 1;
                frontier.insert(frontier.end(), nb2.begin(), nb2.end());
            }
        }
    }

    ClusterSet out;
    out.labels.assign(label.begin(), label.end());
    out.clusters.resize(static_cast<std::size_t>(next));
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] < 0) {
            out.outliers.push_back(pts[i]);
            out.outlier_index.push_back(i);
            continue;
        }
        Cluster& c = out.clusters[static_cast<std::size_t>(label[i])];
        c.points.push_back(pts[i]);
        c.roles.push_back(core[i] ? Role::core : Role::border);
        c.index.push_back(i);
    }
    return out;
}

}  // namespace

void DbscanParams::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw ArgumentError("epsilon must be a positive finite number");
    }
    if (min_pts < 1) {
        throw ArgumentError("min_pts must be at least 1");
    }
}

DbscanParams tuned_preset() { return {10.0, 100}; }
DbscanParams exploratory_preset() { return {30.0, 100}; }

ClusterSet dbscan(const std::vector<Point>& points, const DbscanParams& p) {
    p.validate();
    for (const Point& q : points) {
        if (!std::isfinite(q.x) || !std::isfinite(q.y)) {
            throw ArgumentError("dbscan: non-finite coordinate");
        }
    }
    return run(points, p, Grid(points, p.epsilon));
}

ClusterSet dbscan_reference(const std::vector<Point>& points, const DbscanParams& p) {
    p.validate();
    if (points.size() > kReferenceLimit) {
        throw ArgumentError("dbscan_reference: " + std::to_string(points.size()) + " points exceeds the limit of " +
                            std::to_string(kReferenceLimit));
    }
    return run(points, p, Brute(points, p.epsilon));
}

}  // namespace elseg::cluster
