#include "elseg/synthcell.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "elseg/error.hpp"
#include "elseg/rng.hpp"

namespace elseg::synth {
namespace {

using Point = std::pair<double, double>;

bool in_body(const CellSpec& s, int x, int y) {
    const double px = x + 0.5, py = y + 0.5;
    const double r = s.corner_rounding;
    if (r <= 0.0) {
        return true;
    }
    const double cx = px < r ? r : (px > s.width - r ? s.width - r : px);
    const double cy = py < r ? r : (py > s.height - r ? s.height - r : py);
    const double dx = px - cx, dy = py - cy;
    return dx * dx + dy * dy <= r * r;
}

std::vector<std::pair<int, int>> busbar_column_ranges(const CellSpec& s) {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < s.busbar_count; ++i) {
        const double c = (i + 1.0) * s.width / (s.busbar_count + 1.0);
        const int start = static_cast<int>(std::floor(c - s.busbar_width / 2.0 + 0.5));
        out.emplace_back(std::max(0, start), std::min(s.width, start + s.busbar_width));
    }
    return out;
}

std::vector<double> smoothed_noise(const CellSpec& s) {
    const int w = s.width, h = s.height, r = s.texture_radius;
    Rng rng(mix_seed(s.seed, 0x7e97));
    std::vector<double> noise(static_cast<std::size_t>(w) * h);
    for (double& v : noise) {
        v = rng.uniform(-1.0, 1.0);
    }
    if (r <= 0) {
        return noise;
    }
    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) {
            i = i < 0 ? -i - 1 : 2 * n - i - 1;
        }
        return i;
    };
    std::vector<double> tmp(noise.size());
    const double inv = 1.0 / (2 * r + 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += noise[static_cast<std::size_t>(y) * w + mirror(x + k, w)];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc * inv;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += tmp[static_cast<std::size_t>(mirror(y + k, h)) * w + x];
            }
            noise[static_cast<std::size_t>(y) * w + x] = acc * inv;
        }
    }
    return noise;
}

double min_dim(const CellSpec& s) { return std::min(s.width, s.height); }

/// Placement region: keeps defects off the rounded corners and the frame.
struct Region {
    double x0, y0, x1, y1;
};

Region inner_region(const CellSpec& s) {
    const double inset = std::max(s.corner_rounding, 0.12 * min_dim(s));
    return {inset, inset, s.width - inset, s.height - inset};
}

double default_size(const CellSpec& s, DefectKind k) {
    switch (k) {
    case DefectKind::crack:
        return std::max(2.0, min_dim(s) / 22.0);
    case DefectKind::dead_patch:
        return min_dim(s) / 8.0;
    case DefectKind::degradation:
        return min_dim(s) / 4.0;
    }
    return 1.0;
}

Point anchor(const CellSpec& s, const DefectSpec& d, Rng& rng) {
    const Region r = inner_region(s);
    const double x = d.anchor_x ? *d.anchor_x : rng.uniform(r.x0, r.x1);
    const double y = d.anchor_y ? *d.anchor_y : rng.uniform(r.y0, r.y1);
    return {x, y};
}

double segment_distance(Point p, Point a, Point b) {
    const double vx = b.first - a.first, vy = b.second - a.second;
    const double wx = p.first - a.first, wy = p.second - a.second;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

void CellSpec::validate() const {
    if (width < kMinPipelineDim || height < kMinPipelineDim) {
        throw ArgumentError("cell must be at least 8x8");
    }
    if (busbar_count < 0 || busbar_width < 0) {
        throw ArgumentError("busbar count and width must be non-negative");
    }
    if (busbar_count > 0 && busbar_width < 1) {
        throw ArgumentError("busbar width must be >= 1 when busbars are present");
    }
    if (static_cast<long>(busbar_count) * busbar_width >= width) {
        throw ArgumentError("busbar_count * busbar_width must be smaller than the width");
    }
    if (!(background_level > 0.0 && background_level <= 1.0)) {
        throw ArgumentError("background_level must lie in (0,1]");
    }
    if (texture_amplitude < 0.0 || !(texture_amplitude < background_level)) {
        throw ArgumentError("texture_amplitude must be non-negative and below background_level");
    }
    if (background_level + texture_amplitude > 1.0) {
        throw ArgumentError("background_level + texture_amplitude exceeds 1");
    }
    if (corner_rounding < 0.0 || 2.0 * corner_rounding > std::min(width, height)) {
        throw ArgumentError("corner_rounding out of range");
    }
    if (texture_radius < 0 || dark_level < 0.0 || dark_level >= background_level) {
        throw ArgumentError("invalid texture radius or dark level");
    }
}

std::string to_string(DefectKind k) {
    switch (k) {
    case DefectKind::crack:
        return "crack";
    case DefectKind::dead_patch:
        return "dead_patch";
    case DefectKind::degradation:
        return "degradation";
    }
    return "unknown";
}

DefectKind defect_kind_from_string(const std::string& s) {
    if (s == "crack") return DefectKind::crack;
    if (s == "dead_patch") return DefectKind::dead_patch;
    if (s == "degradation") return DefectKind::degradation;
    throw ArgumentError("unknown defect kind '" + s + "'");
}

std::vector<double> busbar_centers(const CellSpec& spec) {
    std::vector<double> out;
    for (auto [a, b] : busbar_column_ranges(spec)) {
        out.push_back((a + b - 1) / 2.0);
    }
    return out;
}

LabeledImage generate_cell(const CellSpec& spec) {
    spec.validate();
    LabeledImage out;
    out.spec = spec;
    out.image = Image(spec.width, spec.height, spec.background_level);
    out.mask = BinaryMask(spec.width, spec.height);

    if (spec.texture_amplitude > 0.0) {
        auto noise = smoothed_noise(spec);
        double peak = 0.0;
        for (double v : noise) {
            peak = std::max(peak, std::abs(v));
        }
        const double gain = peak > 0.0 ? spec.texture_amplitude / peak : 0.0;
        for (std::size_t i = 0; i < noise.size(); ++i) {
            out.image.data[i] += gain * noise[i];
        }
    }
    for (auto [a, b] : busbar_column_ranges(spec)) {
        for (int y = 0; y < spec.height; ++y) {
            for (int x = a; x < b; ++x) {
                out.image.at(x, y) = spec.dark_level;
            }
        }
    }
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            if (!in_body(spec, x, y)) {
                out.image.at(x, y) = spec.dark_level;
            }
        }
    }
    return out;
}

std::vector<std::pair<double, double>> crack_polyline(const CellSpec& spec, const DefectSpec& d) {
    Rng rng(mix_seed(d.geometry_seed, 0xc4ac));
    const Region r = inner_region(spec);
    std::vector<Point> pts{anchor(spec, d, rng)};
    const int segments = rng.between(2, 5);
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double m = min_dim(spec);
    for (int i = 0; i < segments; ++i) {
        const double len = rng.uniform(m / 8.0, m / 4.0);
        heading += rng.uniform(-std::numbers::pi / 3.0, std::numbers::pi / 3.0);
        auto [px, py] = pts.back();
        double nx = std::clamp(px + len * std::cos(heading), r.x0, r.x1);
        double ny = std::clamp(py + len * std::sin(heading), r.y0, r.y1);
        pts.emplace_back(nx, ny);
    }
    return pts;
}

std::vector<double> defect_weight(const CellSpec& spec, const DefectSpec& d) {
    std::vector<double> w(static_cast<std::size_t>(spec.width) * spec.height, 0.0);
    const double size = d.size ? *d.size : default_size(spec, d.kind);
    auto set = [&](int x, int y, double v) {
        if (in_body(spec, x, y)) {
            w[static_cast<std::size_t>(y) * spec.width + x] = v;
        }
    };

    switch (d.kind) {
    case DefectKind::crack: {
        const auto line = crack_polyline(spec, d);
        const double half = size / 2.0;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const Point p{x + 0.5, y + 0.5};
                double best = INFINITY;
                for (std::size_t k = 0; k + 1 < line.size(); ++k) {
                    best = std::min(best, segment_distance(p, line[k], line[k + 1]));
                }
                if (best <= half) {
                    set(x, y, 1.0);
                }
            }
        }
        break;
    }
    case DefectKind::dead_patch: {
        Rng rng(mix_seed(d.geometry_seed, 0xdead));
        const auto [cx, cy] = anchor(spec, d, rng);
        const int lobes = rng.between(2, 3);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double wobble = rng.uniform(0.1, 0.3);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                const double radius = size * (1.0 + wobble * std::sin(lobes * std::atan2(dy, dx) + phase));
                if (dx * dx + dy * dy <= radius * radius) {
                    set(x, y, 1.0);
                }
            }
        }
        break;
    }
    case DefectKind::degradation: {
        Rng rng(mix_seed(d.geometry_seed, 0xde96));
        const auto [cx, cy] = anchor(spec, d, rng);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double dist = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                if (dist < size) {
                    set(x, y, 0.5 * (1.0 + std::cos(std::numbers::pi * dist / size)));
                }
            }
        }
        break;
    }
    }
    return w;
}

LabeledImage apply_defects(const LabeledImage& cell, const std::vector<DefectSpec>& defects) {
    if (!cell.mask.none()) {
        throw ArgumentError("apply_defects expects a defect-free cell");
    }
    LabeledImage out = cell;
    for (const auto& d : defects) {
        if (!(d.severity > 0.0 && d.severity <= 1.0)) {
            throw ArgumentError("defect severity must lie in (0,1]");
        }
        const auto w = defect_weight(cell.spec, d);
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) {
                out.image.data[i] *= 1.0 - d.severity * w[i];
            }
        }
        out.defects.push_back(d);
    }
    for (std::size_t i = 0; i < out.image.data.size(); ++i) {
        out.mask.bits[i] = out.image.data[i] != cell.image.data[i] ? 1 : 0;
    }
    return out;
}

std::vector<LabeledImage> generate_dataset(int n, double defect_rate, const CellSpec& spec,
                                           std::uint64_t seed, const DefectMix& mix) {
    if (n < 1) {
        throw ArgumentError("generate_dataset: n must be >= 1");
    }
    if (!(defect_rate >= 0.0 && defect_rate <= 1.0)) {
        throw ArgumentError("generate_dataset: defect_rate must lie in [0,1]");
    }
    if (mix.kinds.empty() || mix.min_defects < 1 || mix.max_defects < mix.min_defects) {
        throw ArgumentError("generate_dataset: invalid defect mix");
    }
    spec.validate();
    std::vector<LabeledImage> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        CellSpec cs = spec;
        cs.seed = rng.next();
        LabeledImage cell = generate_cell(cs);
        if (rng.uniform() < defect_rate) {
            std::vector<DefectSpec> defects;
            const int count = rng.between(mix.min_defects, mix.max_defects);
            for (int k = 0; k < count; ++k) {
                DefectSpec d;
                d.kind = mix.kinds[rng.below(mix.kinds.size())];
                d.severity = rng.uniform(mix.min_severity, mix.max_severity);
                d.geometry_seed = rng.next();
                defects.push_back(d);
            }
            cell = apply_defects(cell, defects);
            // A defect confined to dark pixels alters nothing; force a visible one.
            if (cell.mask.none()) {
                DefectSpec d;
                d.kind = DefectKind::dead_patch;
                d.severity = mix.max_severity;
                d.geometry_seed = rng.next();
                d.anchor_x = cs.width / 2.0 + 0.25;
                d.anchor_y = cs.height / 2.0 + 0.25;
                cell = apply_defects(generate_cell(cs), {d});
            }
        }
        out.push_back(std::move(cell));
    }
    return out;
}

namespace {

nlohmann::json spec_json(const CellSpec& s) {
    return {{"width", s.width},
            {"height", s.height},
            {"busbar_count", s.busbar_count},
            {"busbar_width", s.busbar_width},
            {"background_level", s.background_level},
            {"texture_amplitude", s.texture_amplitude},
            {"texture_radius", s.texture_radius},
            {"corner_rounding", s.corner_rounding},
            {"dark_level", s.dark_level},
            {"seed", s.seed}};
}

CellSpec spec_from_json(const nlohmann::json& j) {
    CellSpec s;
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.busbar_count = j.at("busbar_count").get<int>();
    s.busbar_width = j.at("busbar_width").get<int>();
    s.background_level = j.at("background_level").get<double>();
    s.texture_amplitude = j.at("texture_amplitude").get<double>();
    s.texture_radius = j.at("texture_radius").get<int>();
    s.corner_rounding = j.at("corner_rounding").get<double>();
    s.dark_level = j.at("dark_level").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

DefectSpec defect_from_json(const nlohmann::json& j) {
    DefectSpec d;
    d.kind = defect_kind_from_string(j.at("kind").get<std::string>());
    d.severity = j.at("severity").get<double>();
    d.geometry_seed = j.at("geometry_seed").get<std::uint64_t>();
    if (j.contains("anchor_x")) d.anchor_x = j["anchor_x"].get<double>();
    if (j.contains("anchor_y")) d.anchor_y = j["anchor_y"].get<double>();
    if (j.contains("size")) d.size = j["size"].get<double>();
    return d;
}

}  // namespace

BinaryMask defect_footprint(const CellSpec& spec, const DefectSpec& defect) {
    const auto w = defect_weight(spec, defect);
    BinaryMask m(spec.width, spec.height);
    for (std::size_t i = 0; i < w.size(); ++i) m.bits[i] = w[i] > 0.0 ? 1 : 0;
    return m;
}

std::filesystem::path save_dataset(const std::vector<LabeledImage>& items,
                                   const std::filesystem::path& dir, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < items.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cell_%04zu", i);
        const fs::path img_rel = fs::path("images") / (std::string(name) + ".png");
        const fs::path mask_rel = fs::path("masks") / (std::string(name) + ".png");
        save_png(items[i].image, dir / img_rel, 255.0);
        save_png(mask_to_image(items[i].mask), dir / mask_rel, 1.0);
        nlohmann::json defects = nlohmann::json::array();
        for (const auto& d : items[i].defects) {
            nlohmann::json dj = {{"kind", to_string(d.kind)},
                                 {"severity", d.severity},
                                 {"geometry_seed", d.geometry_seed}};
            if (d.anchor_x) dj["anchor_x"] = *d.anchor_x;
            if (d.anchor_y) dj["anchor_y"] = *d.anchor_y;
            if (d.size) dj["size"] = *d.size;
            defects.push_back(dj);
        }
        entries.push_back({{"id", name},
                           {"image", img_rel.generic_string()},
                           {"mask", mask_rel.generic_string()},
                           {"defective", !items[i].mask.none()},
                           {"spec", spec_json(items[i].spec)},
                           {"defects", defects}});
    }
    const nlohmann::json manifest = {{"seed", seed}, {"count", items.size()}, {"items", entries}};
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << manifest.dump(2) << '\n';
    return path;
}

std::vector<TruthEntry> load_truth_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) {
        throw IoError("cannot open " + manifest.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed truth manifest " + manifest.string() + ": " + e.what());
    }
    const auto base = manifest.parent_path();
    std::vector<TruthEntry> out;
    try {
        for (const auto& item : doc.at("items")) {
            TruthEntry e;
            e.id = item.at("id").get<std::string>();
            e.image = base / item.at("image").get<std::string>();
            e.mask = base / item.at("mask").get<std::string>();
            e.defective = item.value("defective", false);
            if (item.contains("spec")) e.spec = spec_from_json(item["spec"]);
            for (const auto& d : item.value("defects", nlohmann::json::array())) e.defects.push_back(defect_from_json(d));
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed truth manifest " + manifest.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError("malformed truth manifest " + manifest.string() + ": " + e.what());
    }
    return out;
}

}  // namespace elseg::synth
