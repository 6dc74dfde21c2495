#include <algorithm>
#include <cmath>
#include <numeric>

#include "elseg/error.hpp"
#include "elseg/segment.hpp"

namespace elseg::segment {
namespace {

struct Run {
    int start = 0;
    int end = 0;  // inclusive
    double depth = 0.0;
};

/// Runs of the profile below (mean - std) that are deep enough and do not touch either end.
/// Runs touching an end belong to the border frame, not to a busbar.
std::vector<Run> dark_runs(const std::vector<double>& profile, double min_depth) {
    const double n = static_cast<double>(profile.size());
    const double mean = std::accumulate(profile.begin(), profile.end(), 0.0) / n;
    double var = 0.0;
    for (double v : profile) {
        var += (v - mean) * (v - mean);
    }
    const double cutoff = mean - std::sqrt(var / n);
    const double deep = mean * (1.0 - min_depth);

    std::vector<Run> runs;
    const int len = static_cast<int>(profile.size());
    for (int i = 0; i < len;) {
        if (!(profile[static_cast<std::size_t>(i)] < cutoff)) {
            ++i;
            continue;
        }
        int j = i;
        double lowest = profile[static_cast<std::size_t>(i)];
        while (j + 1 < len && profile[static_cast<std::size_t>(j + 1)] < cutoff) {
            ++j;
            lowest = std::min(lowest, profile[static_cast<std::size_t>(j)]);
        }
        if (i > 0 && j < len - 1 && lowest < deep) {
            runs.push_back({i, j, mean - lowest});
        }
        i = j + 1;
    }
    return runs;
}

std::vector<Band> to_bands(std::vector<Run> runs, const BusbarOptions& opt) {
    if (opt.expected_count && static_cast<int>(runs.size()) > *opt.expected_count) {
        std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.depth > b.depth; });
        runs.resize(static_cast<std::size_t>(*opt.expected_count));
        std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.start < b.start; });
    }
    std::vector<Band> bands;
    for (const Run& r : runs) {
        bands.push_back({(r.start + r.end) / 2.0, std::max(1.0, (r.end - r.start) / 2.0 + opt.padding)});
    }
    return bands;
}

}  // namespace

void BusbarOptions::validate() const {
    if (expected_count && *expected_count < 0) {
        throw ArgumentError("expected busbar count must be non-negative");
    }
    if (!(border_fraction >= 0.0 && border_fraction < 0.5)) {
        throw ArgumentError("border_fraction must lie in [0, 0.5)");
    }
    if (!(min_depth >= 0.0 && min_depth < 1.0) || padding < 0) {
        throw ArgumentError("min_depth must lie in [0,1) and padding must be non-negative");
    }
}

BusbarLayout detect_busbars(const Image& original, const BusbarOptions& opt) {
    opt.validate();
    if (original.empty()) {
        throw ArgumentError("detect_busbars: empty image");
    }
    const int w = original.width, h = original.height;
    std::vector<double> cols(static_cast<std::size_t>(w), 0.0), rows(static_cast<std::size_t>(h), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            cols[static_cast<std::size_t>(x)] += original.at(x, y) / h;
            rows[static_cast<std::size_t>(y)] += original.at(x, y) / w;
        }
    }
    BusbarLayout layout;
    layout.vertical_bands = to_bands(dark_runs(cols, opt.min_depth), opt);
    layout.horizontal_bands = to_bands(dark_runs(rows, opt.min_depth), opt);
    layout.border_margin =
        std::max(1, static_cast<int>(std::lround(opt.border_fraction * std::min(w, h))));
    return layout;
}

BinaryMask clean_noise(const BinaryMask& mask, const BusbarLayout& layout) {
    BinaryMask out = mask;
    const int m = layout.border_margin;
    for (int y = 0; y < out.height; ++y) {
        const bool row_band = std::any_of(layout.horizontal_bands.begin(), layout.horizontal_bands.end(),
                                          [y](const Band& b) { return b.contains(y); });
        for (int x = 0; x < out.width; ++x) {
            if (!out.at(x, y)) {
                continue;
            }
            const bool frame = x < m || y < m || x >= out.width - m || y >= out.height - m;
            const bool col_band = std::any_of(layout.vertical_bands.begin(), layout.vertical_bands.end(),
                                              [x](const Band& b) { return b.contains(x); });
            if (frame || row_band || col_band) {
                out.at(x, y) = 0;
            }
        }
    }
    return out;
}

std::vector<Point> mask_to_points(const BinaryMask& mask) {
    std::vector<Point> pts;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                pts.push_back({static_cast<double>(x), static_cast<double>(y)});
            }
        }
    }
    return pts;
}

}  // namespace elseg::segment
