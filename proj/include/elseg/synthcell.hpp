#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elseg/imagecore.hpp"
#include "elseg/mask.hpp"

namespace elseg::synth {

/// Mono-crystalline cell appearance. Intensities are on the unit scale.
struct CellSpec {
    int width = 64;
    int height = 64;
    int busbar_count = 3;
    int busbar_width = 3;
    double background_level = 0.7;
    double texture_amplitude = 0.03;
    /// Box-filter radius applied to the white noise before scaling.
    int texture_radius = 2;
    double corner_rounding = 6.0;
    /// Intensity of busbars and the cut-off corners.
    double dark_level = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class DefectKind { crack, dead_patch, degradation };

std::string to_string(DefectKind k);
DefectKind defect_kind_from_string(const std::string& s);

struct DefectSpec {
    DefectKind kind = DefectKind::crack;
    /// Fractional intensity drop at full strength, in (0,1].
    double severity = 0.8;
    std::uint64_t geometry_seed = 0;
    /// Optional placement override (pixel coordinates). Drawn from the seed otherwise.
    std::optional<double> anchor_x;
    std::optional<double> anchor_y;
    /// Crack line width, patch radius or degradation radius in pixels; scaled from the
    /// cell size when unset.
    std::optional<double> size;
};

struct LabeledImage {
    Image image;
    BinaryMask mask;
    CellSpec spec;
    std::vector<DefectSpec> defects;
};

/// Defect-free render: bright textured body, dark vertical busbars, dark rounded corners.
LabeledImage generate_cell(const CellSpec& spec);

/// Centre column of each busbar band as rendered.
std::vector<double> busbar_centers(const CellSpec& spec);

/// Multiplicative darkening; mask marks exactly the pixels whose value changed.
LabeledImage apply_defects(const LabeledImage& cell, const std::vector<DefectSpec>& defects);

/// Per-pixel darkening weight in [0,1] of one defect on a given cell geometry.
/// Exposed for tests; apply_defects multiplies by (1 - severity * weight).
std::vector<double> defect_weight(const CellSpec& spec, const DefectSpec& defect);

/// Pixels a defect can touch (weight > 0).
BinaryMask defect_footprint(const CellSpec& spec, const DefectSpec& defect);

/// Crack centreline for a given cell geometry (pixel-centre coordinates).
std::vector<std::pair<double, double>> crack_polyline(const CellSpec& spec, const DefectSpec& defect);

struct DefectMix {
    std::vector<DefectKind> kinds = {DefectKind::crack, DefectKind::dead_patch, DefectKind::degradation};
    int min_defects = 1;
    int max_defects = 1;
    double min_severity = 0.6;
    double max_severity = 0.9;
};

std::vector<LabeledImage> generate_dataset(int n, double defect_rate, const CellSpec& spec,
                                           std::uint64_t seed, const DefectMix& mix = {});

/// Writes images/ and masks/ PNGs plus manifest.json. Returns the manifest path.
std::filesystem::path save_dataset(const std::vector<LabeledImage>& items,
                                   const std::filesystem::path& dir, std::uint64_t seed);

struct TruthEntry {
    std::string id;
    std::filesystem::path image;
    std::filesystem::path mask;
    bool defective = false;
    /// Present when the manifest was written by save_dataset.
    std::optional<CellSpec> spec;
    std::vector<DefectSpec> defects;
};

/// Reads manifest.json written by save_dataset; paths are resolved against its directory.
std::vector<TruthEntry> load_truth_manifest(const std::filesystem::path& manifest);

}  // namespace elseg::synth
