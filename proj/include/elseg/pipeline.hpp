#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elseg/annotate.hpp"
#include "elseg/autoenc.hpp"
#include "elseg/cluster.hpp"
#include "elseg/segment.hpp"
#include "elseg/ssim.hpp"
#include "elseg/synthcell.hpp"

namespace elseg::pipeline {

inline ssim::SsimParams desk_disparity() {
    auto p = ssim::disparity_preset();
    p.window_size = 3;
    return p;
}

inline segment::ThresholdConfig desk_threshold() {
    segment::ThresholdConfig t;
    t.adaptive_c = 6.0;
    return t;
}

inline segment::BusbarOptions desk_busbar() {
    segment::BusbarOptions b;
    b.border_fraction = 0.1;
    b.min_depth = 0.3;
    b.padding = 0;
    return b;
}

/// Defaults are tuned for 64x64 cells and the desk model; paper_preset() restores the full-scale values.
struct PipelineConfig {
    ssim::SsimParams loss = ssim::loss_preset();
    ssim::SsimParams disparity = desk_disparity();
    segment::ThresholdConfig threshold = desk_threshold();
    segment::BusbarOptions busbar = desk_busbar();
    cluster::DbscanParams dbscan = {3.0, 15};
    double alpha = 1.4142135623730951;

    ae::Scale scale = ae::Scale::desk;
    ae::TrainConfig train;
    double train_fraction = 0.8;
    bool augment = false;

    int synth_count = 200;
    double synth_defect_rate = 0.5;
    synth::CellSpec cell;

    double t_revision = 5.3;
    double t_tuning = 1950.0;

    std::uint64_t seed = 0;
    int workers = 1;

    std::filesystem::path data_dir = "data";
    std::filesystem::path model_path = "model.elsm";
    std::filesystem::path out_dir = "out";

    /// Runs every owning module's validator; throws ValidationError naming the section.
    void validate() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&);
};

/// 640x480 cells, the full model and the published segmentation parameters.
PipelineConfig paper_preset();

/// Dotted-section key/value text with comments and defaults.
std::string serialize(const PipelineConfig& c);
PipelineConfig parse_config(const std::string& text);
/// Reads the file, applies ELSEG_<SECTION>_<KEY> environment overrides, validates.
PipelineConfig load_config(const std::filesystem::path& path);
/// Every "section.key" the parser accepts.
std::vector<std::string> config_keys();
/// Environment variable consulted for a key, e.g. "dbscan.min_pts" -> ELSEG_DBSCAN_MIN_PTS.
std::string env_name(const std::string& key);
/// Applies one "section.key" = value assignment (for --set style overrides).
void set_value(PipelineConfig& c, const std::string& key, const std::string& value);

struct TrainOutcome {
    ae::Model model;
    ae::TrainReport report;
    std::size_t train_images = 0;       // after augmentation
    std::size_t validation_images = 0;
};

/// Preprocesses to the model input, splits, augments the training share if configured, trains.
TrainOutcome train_model(const PipelineConfig& cfg, const std::vector<Image>& raw_images,
                         const ae::EpochCallback& on_epoch = {});

struct InferInput {
    std::string id;
    std::filesystem::path path;
};

struct ImageTiming {
    std::string id;
    double seconds = 0.0;
    std::size_t polygons = 0;
    std::optional<std::string> error;
};

struct InferResult {
    std::vector<annotate::AnnotationRecord> records;  // successful images, input order
    std::vector<ImageTiming> timing;                  // every image, input order
    double total_seconds = 0.0;
    int workers = 1;

    std::size_t failures() const;
    double mean_seconds() const;
    nlohmann::json timing_json() const;
};

/// Intermediate products of one image, for inspection and tests.
struct Stages {
    Image input;           // preprocessed, model resolution
    Image reconstruction;
    Image disparity;       // (1 - ssim) / 2
    BinaryMask threshold;
    BinaryMask cleaned;
    segment::BusbarLayout busbars;
    cluster::ClusterSet clusters;
};

/// Full per-image pipeline on an already loaded raw image.
annotate::AnnotationRecord annotate_image(const PipelineConfig& cfg, const ae::Model& model, const Image& raw,
                                          const std::string& id, Stages* stages = nullptr);

/// Batch over files on a worker pool; per-image failures are recorded and do not stop the batch.
InferResult run_infer(const PipelineConfig& cfg, const ae::Model& model, const std::vector<InferInput>& inputs);

/// Images of a directory (png/pgm, sorted by name) or of a synthcell manifest.json.
std::vector<InferInput> discover_inputs(const std::filesystem::path& dir_or_manifest);

struct ImageScore {
    std::string id;
    bool defective = false;
    double iou = 0.0;
    std::size_t truth_components = 0;
    std::size_t detected_components = 0;
    std::size_t predicted_polygons = 0;
    std::size_t matched_polygons = 0;
};

struct EvalReport {
    std::vector<ImageScore> images;
    double mean_iou = 0.0;            // all images
    double mean_iou_defective = 0.0;  // images with a non-empty truth mask
    double precision = 0.0;
    double recall = 0.0;
    /// Share of defect-free images that received no polygon.
    double clean_empty_fraction = 0.0;
    std::optional<annotate::CostModel> cost;

    nlohmann::json to_json() const;
};

/// One mask per generated defect (its footprint within the truth mask) when the entry carries the
/// defect list; connected components of the truth mask otherwise.
std::vector<BinaryMask> truth_instances(const synth::TruthEntry& t, const BinaryMask& truth_mask);

/// Detection at IoU 0.5 per truth instance: an instance counts as found when the union of the
/// polygons touching it reaches IoU 0.5 with it; a polygon counts as correct when it touches a found instance.
EvalReport run_evaluate(const std::vector<annotate::AnnotationRecord>& records,
                        const std::vector<synth::TruthEntry>& truth,
                        std::optional<double> t_inference = std::nullopt, double t_revision = 5.3,
                        double t_tuning = 1950.0);

/// Rasterized polygons plus the pixels of point-only clusters.
BinaryMask prediction_mask(const annotate::AnnotationRecord& r);

void write_records(const std::vector<annotate::AnnotationRecord>& records, const std::filesystem::path& path);
std::vector<annotate::AnnotationRecord> read_records(const std::filesystem::path& path);

}  // namespace elseg::pipeline
