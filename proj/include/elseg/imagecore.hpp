#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace elseg {

/// Row-major grayscale raster. Raw loads carry intensities in [0,255];
/// after rescale_unit every value lies in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    friend bool operator==(const Image&, const Image&) = default;
};

struct DatasetSplit {
    std::vector<Image> train;
    std::vector<Image> validation;
    /// Positions in the input list, parallel to train/validation.
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> validation_index;
    double split_fraction = 0.8;
};

/// Smallest dimension accepted by pipeline entry points.
inline constexpr int kMinPipelineDim = 8;

void check_pipeline_dims(const Image& img);

// I/O. PNG (gray, gray+alpha, RGB, RGBA; 8 or 16 bit) and binary PGM (P5, maxval 255).
Image load_grayscale(const std::filesystem::path& path);
/// Writes 8-bit grayscale PNG. `scale` maps intensities to [0,255] (1 for raw, 255 for unit images).
void save_png(const Image& img, const std::filesystem::path& path, double scale = 1.0);
void save_pgm(const Image& img, const std::filesystem::path& path, double scale = 1.0);

Image resize(const Image& img, int w, int h);
Image rescale_unit(const Image& img);
/// Min-max stretch onto [0, range_max]; constant images come back unchanged.
Image normalize_contrast(const Image& img, double range_max = 255.0);

/// resize -> normalize_contrast -> rescale_unit on a raw [0,255] image.
Image preprocess(const Image& raw, int w, int h);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image rotate_180(const Image& img);
/// {identity, flip-h, flip-v, rot180}, in that order.
std::vector<Image> augment(const Image& img);

DatasetSplit split_dataset(const std::vector<Image>& imgs, double fraction, std::uint64_t seed);

/// Newline-separated relative paths; blank lines and '#' comments skipped.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<std::filesystem::path>& entries);

}  // namespace elseg
