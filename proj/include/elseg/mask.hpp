#pragma once

#include <cstdint>
#include <vector>

#include "elseg/imagecore.hpp"

namespace elseg {

/// 1 = candidate defect pixel. Row-major, one byte per pixel.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (auto b : bits) {
            n += b != 0;
        }
        return n;
    }
    bool none() const { return popcount() == 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// 0/1 mask rendered as a 0/255 image, for PNG export.
Image mask_to_image(const BinaryMask& m);
/// Pixels > 127 (raw scale) become 1.
BinaryMask image_to_mask(const Image& img);

/// Connected components (8-connectivity), each as a mask of the same size.
std::vector<BinaryMask> connected_components(const BinaryMask& m);

}  // namespace elseg
