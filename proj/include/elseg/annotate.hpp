#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "elseg/geometry.hpp"
#include "elseg/mask.hpp"

namespace elseg::annotate {

using geometry::Polygon;

enum class Status { silver, gold, rejected };

std::string to_string(Status s);
Status status_from_string(const std::string& s);

/// silver -> gold, silver -> rejected, gold -> gold.
bool can_transition(Status from, Status to);

/// Pixel (i, j) covers [i, i+1) x [j, j+1); polygon vertices use the same frame.
struct AnnotationRecord {
    std::string image_id;
    std::string source_path;
    int width = 0;
    int height = 0;
    std::vector<Polygon> polygons;
    /// Clusters that could not be triangulated, kept as raw points.
    std::vector<std::vector<Point>> fallback_points;
    Status status = Status::silver;
    std::string note;
    long version = 1;
    std::string created_at;
    std::string updated_at;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Throws ValidationError naming the record when a vertex leaves [0,w] x [0,h].
void validate_record(const AnnotationRecord& r);

/// Moves a record to a new status, or throws ValidationError.
void transition(AnnotationRecord& r, Status to);

/// UTC, second resolution, "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

nlohmann::json record_to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const nlohmann::json& j);

struct Category {
    int id = 1;
    std::string name = "defect";
    std::string supercategory = "anomaly";
};

/// Serialized with sorted keys, two-space indent and 6-decimal floats.
std::string dump_stable(const nlohmann::json& j);

/// Coordinates are quantized to 6 decimals before area and bbox are derived.
nlohmann::json to_coco(std::vector<AnnotationRecord> records, const std::vector<Category>& categories = {Category{}});
std::string to_coco_string(const std::vector<AnnotationRecord>& records,
                           const std::vector<Category>& categories = {Category{}});

/// Rebuilds silver records (polygons only) from a COCO document.
std::vector<AnnotationRecord> from_coco(const nlohmann::json& doc);

/// XML namespace of the polygon extension element in VOC files.
inline constexpr const char* kVocPolygonNamespace = "urn:elseg:voc-polygon:1";

struct ImageMeta {
    std::string folder = "images";
    std::string filename;
    int depth = 1;
};

std::string to_voc(const AnnotationRecord& r, const ImageMeta& meta);

/// Writes <image-stem>.xml into dir; returns the path.
std::filesystem::path write_voc(const AnnotationRecord& r, const std::filesystem::path& dir);

struct BBox {
    long xmin = 0, ymin = 0, xmax = 0, ymax = 0;
};
BBox voc_bbox(const Polygon& p);

/// Structural check of an XML document against a schema using a subset of XSD:
/// element, complexType, sequence, attribute, any and the common built-in simple types.
/// Returns an empty list when valid.
std::vector<std::string> validate_xml(const std::string& xml, const std::string& xsd);

/// Path of the bundled VOC schema.
std::filesystem::path voc_schema_path();

/// Set where the pixel centre lies inside or on any polygon.
BinaryMask rasterize(const std::vector<Polygon>& polygons, int width, int height);

/// |a & b| / |a | b|, 1 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct CostModel {
    double t_inference = 0.0;
    double t_revision = 0.0;
    double t_tuning = 0.0;
    long n_images = 1;

    void validate() const;
};

/// t_inference + t_revision + t_tuning / n_images.
double cost_per_image(const CostModel& c);

}  // namespace elseg::annotate
