#include "elseg/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/rng.hpp"

namespace elseg {

Image::Image(int w, int h, double fill) : width(w), height(h) {
    if (w < 0 || h < 0) {
        throw ArgumentError("image dimensions must be non-negative");
    }
    data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

void check_pipeline_dims(const Image& img) {
    if (img.width < kMinPipelineDim || img.height < kMinPipelineDim) {
        throw ArgumentError("image must be at least 8x8, got " + std::to_string(img.width) + "x" +
                            std::to_string(img.height));
    }
    if (img.data.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw ArgumentError("image data length does not match its dimensions");
    }
}

Image resize(const Image& img, int w, int h) {
    if (w < 1 || h < 1) {
        throw ArgumentError("resize target dimensions must be >= 1");
    }
    if (img.empty()) {
        throw ArgumentError("cannot resize an empty image");
    }
    if (w == img.width && h == img.height) {
        return img;
    }

    // Half-pixel-centre mapping, edge samples clamped.
    const double sx = static_cast<double>(img.width) / w;
    const double sy = static_cast<double>(img.height) / h;

    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int o = 0; o < n_out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            const int i1 = std::min(i0 + 1, n_in - 1);
            t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
        }
        return t;
    };
    const auto tx = taps(w, img.width, sx);
    const auto ty = taps(h, img.height, sy);

    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        const Tap& ry = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x) {
            const Tap& rx = tx[static_cast<std::size_t>(x)];
            const double a = img.at(rx.i0, ry.i0);
            const double b = img.at(rx.i1, ry.i0);
            const double c = img.at(rx.i0, ry.i1);
            const double d = img.at(rx.i1, ry.i1);
            const double top = a + rx.f * (b - a);
            const double bottom = c + rx.f * (d - c);
            out.at(x, y) = top + ry.f * (bottom - top);
        }
    }
    return out;
}

Image rescale_unit(const Image& img) {
    Image out = img;
    std::size_t clamped = 0;
    for (double& v : out.data) {
        if (v < 0.0 || v > 255.0) {
            ++clamped;
            v = std::clamp(v, 0.0, 255.0);
        }
        v /= 255.0;
    }
    if (clamped > 0) {
        spdlog::warn("rescale_unit: clamped {} value(s) outside [0,255]", clamped);
    }
    return out;
}

Image normalize_contrast(const Image& img, double range_max) {
    if (img.empty()) {
        throw ArgumentError("normalize_contrast requires a non-empty image");
    }
    const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) {
        return img;
    }
    Image out = img;
    const double gain = range_max / (hi - lo);
    for (double& v : out.data) {
        v = (v - lo) * gain;
    }
    return out;
}

Image preprocess(const Image& raw, int w, int h) {
    return rescale_unit(normalize_contrast(resize(raw, w, h)));
}

Image flip_horizontal(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out.at(x, y) = img.at(img.width - 1 - x, y);
        }
    }
    return out;
}

Image flip_vertical(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out.at(x, y) = img.at(x, img.height - 1 - y);
        }
    }
    return out;
}

Image rotate_180(const Image& img) {
    Image out = img;
    std::reverse(out.data.begin(), out.data.end());
    return out;
}

std::vector<Image> augment(const Image& img) {
    return {img, flip_horizontal(img), flip_vertical(img), rotate_180(img)};
}

DatasetSplit split_dataset(const std::vector<Image>& imgs, double fraction, std::uint64_t seed) {
    if (imgs.empty()) {
        throw ArgumentError("split_dataset: empty image list");
    }
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ArgumentError("split_dataset: fraction must lie in (0,1)");
    }
    std::vector<std::size_t> order(imgs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(imgs.size())));
    DatasetSplit split;
    split.split_fraction = fraction;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k < n_train) {
            split.train.push_back(imgs[order[k]]);
            split.train_index.push_back(order[k]);
        } else {
            split.validation.push_back(imgs[order[k]]);
            split.validation_index.push_back(order[k]);
        }
    }
    return split;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) {
        throw IoError("cannot open manifest " + manifest.string());
    }
    std::vector<std::filesystem::path> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        out.emplace_back(line);
    }
    return out;
}

void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<std::filesystem::path>& entries) {
    std::ofstream out(manifest);
    if (!out) {
        throw IoError("cannot write manifest " + manifest.string());
    }
    for (const auto& e : entries) {
        out << e.generic_string() << '\n';
    }
}

}  // namespace elseg
