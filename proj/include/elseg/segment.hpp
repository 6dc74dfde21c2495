#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "elseg/imagecore.hpp"
#include "elseg/mask.hpp"
#include "elseg/point.hpp"
#include "elseg/ssim.hpp"

namespace elseg::segment {

/// d = (1 - ssim) / 2: 0 where the images agree, 1 at maximal disparity.
Image disparity_intensity(const ssim::DisparityMap& map);

struct OtsuResult {
    /// Decision boundary on the input scale: pixels above it form the mask.
    double threshold = 0.0;
    /// Winning histogram level (0..255); mask = level(pixel) > this.
    int level = 0;
    BinaryMask mask;
    bool degenerate = false;
};

/// Histogram level of a value on [0, range_max] quantized to 256 bins.
int quantize_level(double v, double range_max);

/// Otsu over 256 quantized levels of [0, range_max]; ties go to the lowest level.
OtsuResult otsu_threshold(const Image& img, double range_max = 1.0);

enum class CombineMode { union_mode, intersection_mode };

std::string to_string(CombineMode m);
CombineMode combine_mode_from_string(const std::string& s);

struct ThresholdConfig {
    /// Odd window side for the local mean (61 tuned, 41 original).
    int adaptive_block = 61;
    /// Offset on the 0..255 scale; a pixel is set when it exceeds the local mean by more than C.
    double adaptive_c = 10.0;
    CombineMode combine = CombineMode::union_mode;
    /// Lower bound for the global Otsu threshold. 0 leaves Otsu untouched.
    double otsu_floor = 0.0;
    /// Intensity range of the thresholded image (1 for disparity intensity).
    double value_range = 1.0;

    void validate() const;
    void validate_for(int width, int height) const;
};

BinaryMask adaptive_mean_threshold(const Image& img, const ThresholdConfig& cfg);
BinaryMask combine_masks(const BinaryMask& a, const BinaryMask& b, CombineMode mode);

/// Otsu (with floor) and adaptive mean on the same image, then combined.
BinaryMask threshold_disparity(const Image& disparity, const ThresholdConfig& cfg);

struct Band {
    double center = 0.0;
    double half_width = 1.0;
    bool contains(int i) const { return std::abs(i - center) <= half_width; }
    friend bool operator==(const Band&, const Band&) = default;
};

struct BusbarLayout {
    std::vector<Band> vertical_bands;    // centres are columns
    std::vector<Band> horizontal_bands;  // centres are rows
    int border_margin = 1;
};

struct BusbarOptions {
    std::optional<int> expected_count;
    /// Border frame width as a fraction of the smaller image side.
    double border_fraction = 0.02;
    /// A band's minimum must sit at least this fraction below the profile mean.
    double min_depth = 0.05;
    /// Extra pixels added to each side of a detected band.
    int padding = 1;

    void validate() const;
};

/// Dark bands from column/row mean profiles of the original image.
BusbarLayout detect_busbars(const Image& original, const BusbarOptions& opt = {});

BinaryMask clean_noise(const BinaryMask& mask, const BusbarLayout& layout);

/// Set pixels in row-major order.
std::vector<Point> mask_to_points(const BinaryMask& mask);

}  // namespace elseg::segment
