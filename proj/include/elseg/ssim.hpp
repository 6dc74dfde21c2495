#pragma once

#include <vector>

#include "elseg/imagecore.hpp"

namespace elseg::ssim {

struct SsimParams {
    int window_size = 7;
    /// Non-positive means window_size / 6.
    double gaussian_sigma = 0.0;
    double k1 = 0.001;
    double k2 = 0.03;
    /// Dynamic range: 255 on raw 8-bit data, 1 after rescale_unit.
    double dynamic_range = 1.0;

    double sigma() const { return gaussian_sigma > 0.0 ? gaussian_sigma : window_size / 6.0; }
    void validate() const;
};

/// Training-loss preset: 7x7 window, k1 = 0.001, k2 = 0.03.
SsimParams loss_preset(double dynamic_range = 1.0);
/// Disparity preset: 11x11 window, k1 = 0.001, k2 = 0.05.
SsimParams disparity_preset(double dynamic_range = 1.0);

/// size x size normalized Gaussian weights, row-major.
struct Window {
    int size = 0;
    std::vector<double> weights;
    double at(int dx, int dy) const { return weights[static_cast<std::size_t>(dy) * size + dx]; }
};

Window gaussian_window(int size, double sigma);
/// The normalized 1-D profile whose outer product is gaussian_window(size, sigma).
std::vector<double> gaussian_taps(int size, double sigma);

/// Mirror index with edge duplication (... c b a | a b c ... ).
int mirror_index(int i, int n);

/// Per-pixel SSIM, same dimensions as the compared images, values in [-1,1].
struct DisparityMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

DisparityMap ssim_map(const Image& a, const Image& b, const SsimParams& p);
double mean_ssim(const Image& a, const Image& b, const SsimParams& p);

struct SsimGradient {
    double mean = 0.0;
    /// d(mean_ssim)/d(b), one entry per pixel.
    std::vector<double> d_b;
};

/// mean_ssim(a,b) together with its analytic gradient with respect to b.
SsimGradient mean_ssim_with_gradient(const Image& a, const Image& b, const SsimParams& p);

/// Heatmap of a disparity map for debugging: SSIM 1 -> black, -1 -> white (0..255 scale).
Image disparity_heatmap(const DisparityMap& m);

}  // namespace elseg::ssim
