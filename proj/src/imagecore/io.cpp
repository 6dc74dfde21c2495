#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "elseg/error.hpp"
#include "elseg/imagecore.hpp"

namespace elseg {
namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<unsigned char>& bytes) {
    static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
    }
    // libpng performs the RGB -> luma conversion for PNG_FORMAT_GRAY.
    png.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    std::transform(buf.begin(), buf.end(), img.data.begin(), [](png_byte b) { return double(b); });
    return img;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::vector<unsigned char>& bytes, std::size_t& pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(bytes[pos])) {
            ++pos;
        }
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) {
        tok.push_back(static_cast<char>(bytes[pos++]));
    }
    return tok;
}

Image decode_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    std::size_t pos = 2;
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pgm_token(bytes, pos));
        h = std::stoi(pgm_token(bytes, pos));
        maxval = std::stoi(pgm_token(bytes, pos));
    } catch (const std::exception&) {
        throw IoError("truncated PGM header in " + path.string());
    }
    if (maxval != 255) {
        throw FormatError("unsupported PGM maxval " + std::to_string(maxval) + " in " + path.string());
    }
    if (w <= 0 || h <= 0) {
        throw FormatError("invalid PGM dimensions in " + path.string());
    }
    ++pos;  // single whitespace byte after maxval
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() < pos + n) {
        throw IoError("truncated PGM raster in " + path.string());
    }
    Image img(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        img.data[i] = bytes[pos + i];
    }
    return img;
}

std::vector<png_byte> to_bytes(const Image& img, double scale) {
    std::vector<png_byte> out(img.data.size());
    std::transform(img.data.begin(), img.data.end(), out.begin(), [scale](double v) {
        return static_cast<png_byte>(std::clamp(std::lround(v * scale), 0L, 255L));
    });
    return out;
}

}  // namespace

Image load_grayscale(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (is_png(bytes)) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        return decode_pgm(bytes, path);
    }
    if (bytes.empty()) {
        throw IoError("empty file " + path.string());
    }
    throw FormatError("unsupported image format: " + path.string());
}

void save_png(const Image& img, const std::filesystem::path& path, double scale) {
    if (img.empty()) {
        throw ArgumentError("cannot save an empty image");
    }
    auto buf = to_bytes(img, scale);
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + png.message);
    }
}

void save_pgm(const Image& img, const std::filesystem::path& path, double scale) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    const auto buf = to_bytes(img, scale);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace elseg
