#pragma once

#include <cstddef>
#include <vector>

#include "elseg/point.hpp"

namespace elseg::cluster {

struct DbscanParams {
    /// Neighbourhood radius in pixels; neighbours satisfy distance < epsilon.
    double epsilon = 10.0;
    /// Minimum neighbourhood size, counting the point itself.
    int min_pts = 100;

    void validate() const;
};

/// The tuned run (epsilon 10) and the exploratory optimum (epsilon near 30), both minPts 100.
DbscanParams tuned_preset();
DbscanParams exploratory_preset();

enum class Role { core, border };

struct Cluster {
    std::vector<Point> points;
    std::vector<Role> roles;          // parallel to points
    std::vector<std::size_t> index;   // input positions, parallel to points
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    std::vector<Point> outliers;
    std::vector<std::size_t> outlier_index;
    /// Per input point: cluster id, or -1 for outliers.
    std::vector<int> labels;
};

/// Grid-indexed DBSCAN. Cluster ids follow the input order of their seed points.
ClusterSet dbscan(const std::vector<Point>& points, const DbscanParams& p);

/// O(n^2) pairwise reference with the same contract. Refuses more than kReferenceLimit points.
ClusterSet dbscan_reference(const std::vector<Point>& points, const DbscanParams& p);

inline constexpr std::size_t kReferenceLimit = 5000;

}  // namespace elseg::cluster
