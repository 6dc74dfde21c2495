#include <vector>

#include "elseg/mask.hpp"

namespace elseg {

Image mask_to_image(const BinaryMask& m) {
    Image img(m.width, m.height);
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
        img.data[i] = m.bits[i] ? 255.0 : 0.0;
    }
    return img;
}

BinaryMask image_to_mask(const Image& img) {
    BinaryMask m(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        m.bits[i] = img.data[i] > 127.0 ? 1 : 0;
    }
    return m;
}

std::vector<BinaryMask> connected_components(const BinaryMask& m) {
    std::vector<int> label(m.bits.size(), -1);
    std::vector<BinaryMask> out;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * m.width + x;
            if (!m.bits[idx] || label[idx] >= 0) {
                continue;
            }
            const int id = static_cast<int>(out.size());
            BinaryMask comp(m.width, m.height);
            label[idx] = id;
            stack.emplace_back(x, y);
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                comp.at(cx, cy) = 1;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (!m.in_bounds(nx, ny)) {
                            continue;
                        }
                        const std::size_t n = static_cast<std::size_t>(ny) * m.width + nx;
                        if (m.bits[n] && label[n] < 0) {
                            label[n] = id;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
            out.push_back(std::move(comp));
        }
    }
    return out;
}

}  // namespace elseg
