#include <algorithm>
#include <array>
#include <cmath>

#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/segment.hpp"

namespace elseg::segment {

Image disparity_intensity(const ssim::DisparityMap& map) {
    Image out(map.width, map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        out.data[i] = (1.0 - map.values[i]) / 2.0;
    }
    return out;
}

int quantize_level(double v, double range_max) {
    return static_cast<int>(std::clamp(std::lround(v / range_max * 255.0), 0L, 255L));
}

OtsuResult otsu_threshold(const Image& img, double range_max) {
    if (img.empty()) {
        throw ArgumentError("otsu_threshold: empty image");
    }
    if (!(range_max > 0.0)) {
        throw ArgumentError("otsu_threshold: range_max must be positive");
    }
    std::array<double, 256> count{};
    std::vector<int> level(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        level[i] = quantize_level(img.data[i], range_max);
        count[static_cast<std::size_t>(level[i])] += 1.0;
    }
    const double n = static_cast<double>(img.size());
    double total = 0.0;
    for (int t = 0; t < 256; ++t) {
        total += t * count[static_cast<std::size_t>(t)];
    }

    // Between-class variance w0 * w1 * (mu0 - mu1)^2 written as
    // (mu_T * w0 - m0)^2 / (w0 * (1 - w0)) with cumulative w0 and first moment m0.
    const double mu_t = total / n;
    double w0 = 0.0, m0 = 0.0;
    double best = 0.0;
    int best_level = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += count[static_cast<std::size_t>(t)] / n;
        m0 += t * count[static_cast<std::size_t>(t)] / n;
        const double w1 = 1.0 - w0;
        if (w0 <= 0.0 || w1 <= 1e-15) {
            continue;
        }
        const double diff = mu_t * w0 - m0;
        const double var = diff * diff / (w0 * w1);
        if (var > best) {
            best = var;
            best_level = t;
        }
    }

    OtsuResult r;
    r.mask = BinaryMask(img.width, img.height);
    if (best_level < 0) {
        r.degenerate = true;
        r.threshold = *std::max_element(img.data.begin(), img.data.end());
        r.level = quantize_level(r.threshold, range_max);
        spdlog::debug("otsu_threshold: single-level histogram, empty mask");
        return r;
    }
    r.level = best_level;
    r.threshold = (best_level + 0.5) * range_max / 255.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        r.mask.bits[i] = level[i] > best_level ? 1 : 0;
    }
    return r;
}

std::string to_string(CombineMode m) {
    return m == CombineMode::union_mode ? "union" : "intersection";
}

CombineMode combine_mode_from_string(const std::string& s) {
    if (s == "union") return CombineMode::union_mode;
    if (s == "intersection") return CombineMode::intersection_mode;
    throw ArgumentError("unknown combine mode '" + s + "' (expected union or intersection)");
}

void ThresholdConfig::validate() const {
    if (adaptive_block < 3 || adaptive_block % 2 == 0) {
        throw ArgumentError("adaptive_block must be odd and >= 3");
    }
    if (!(value_range > 0.0)) {
        throw ArgumentError("value_range must be positive");
    }
    if (!std::isfinite(adaptive_c) || !std::isfinite(otsu_floor)) {
        throw ArgumentError("adaptive_c and otsu_floor must be finite");
    }
}

void ThresholdConfig::validate_for(int width, int height) const {
    validate();
    if (adaptive_block >= width || adaptive_block >= height) {
        throw ArgumentError("adaptive_block " + std::to_string(adaptive_block) + " must be smaller than the image (" +
                            std::to_string(width) + "x" + std::to_string(height) + ")");
    }
}

BinaryMask adaptive_mean_threshold(const Image& img, const ThresholdConfig& cfg) {
    cfg.validate_for(img.width, img.height);
    const int w = img.width, h = img.height, r = cfg.adaptive_block / 2;
    const double inv = 1.0 / (static_cast<double>(cfg.adaptive_block) * cfg.adaptive_block);

    std::vector<double> rows(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += img.at(ssim::mirror_index(x + k, w), y);
            }
            rows[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    const double offset = cfg.adaptive_c / 255.0 * cfg.value_range;
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += rows[static_cast<std::size_t>(ssim::mirror_index(y + k, h)) * w + x];
            }
            out.at(x, y) = img.at(x, y) > acc * inv + offset ? 1 : 0;
        }
    }
    return out;
}

BinaryMask combine_masks(const BinaryMask& a, const BinaryMask& b, CombineMode mode) {
    if (a.width != b.width || a.height != b.height) {
        throw ArgumentError("combine_masks: dimension mismatch");
    }
    BinaryMask out(a.width, a.height);
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        out.bits[i] = (mode == CombineMode::union_mode ? (pa || pb) : (pa && pb)) ? 1 : 0;
    }
    return out;
}

BinaryMask threshold_disparity(const Image& disparity, const ThresholdConfig& cfg) {
    cfg.validate_for(disparity.width, disparity.height);
    OtsuResult otsu = otsu_threshold(disparity, cfg.value_range);
    if (cfg.otsu_floor > 0.0 && (otsu.degenerate || otsu.threshold < cfg.otsu_floor)) {
        for (std::size_t i = 0; i < disparity.size(); ++i) {
            otsu.mask.bits[i] = disparity.data[i] > cfg.otsu_floor ? 1 : 0;
        }
    }
    return combine_masks(otsu.mask, adaptive_mean_threshold(disparity, cfg), cfg.combine);
}

}  // namespace elseg::segment
