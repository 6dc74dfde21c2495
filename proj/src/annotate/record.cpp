#include <chrono>
#include <cmath>
#include <ctime>

#include <fmt/format.h>

#include "elseg/annotate.hpp"
#include "elseg/error.hpp"

namespace elseg::annotate {

std::string to_string(Status s) {
    switch (s) {
        case Status::silver: return "silver";
        case Status::gold: return "gold";
        case Status::rejected: return "rejected";
    }
    return "silver";
}

Status status_from_string(const std::string& s) {
    if (s == "silver") return Status::silver;
    if (s == "gold") return Status::gold;
    if (s == "rejected") return Status::rejected;
    throw ArgumentError("unknown status '" + s + "'");
}

bool can_transition(Status from, Status to) {
    return (from == Status::silver && to != Status::silver) || (from == Status::gold && to == Status::gold);
}

void transition(AnnotationRecord& r, Status to) {
    if (!can_transition(r.status, to)) {
        throw ValidationError(fmt::format("record {}: {} -> {} is not allowed", r.image_id, to_string(r.status),
                                          to_string(to)));
    }
    r.status = to;
}

void validate_record(const AnnotationRecord& r) {
    if (r.width <= 0 || r.height <= 0) {
        throw ValidationError(fmt::format("record {}: image size {}x{} is invalid", r.image_id, r.width, r.height));
    }
    auto check = [&](const Point& p) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > r.width || p.y > r.height) {
            throw ValidationError(fmt::format("record {}: vertex ({}, {}) outside {}x{}", r.image_id, p.x, p.y,
                                              r.width, r.height));
        }
    };
    for (const auto& poly : r.polygons) {
        if (poly.vertices.size() < 3) {
            throw ValidationError(fmt::format("record {}: polygon with {} vertices", r.image_id, poly.vertices.size()));
        }
        for (const auto& p : poly.vertices) check(p);
    }
    for (const auto& pts : r.fallback_points)
        for (const auto& p : pts) check(p);
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

nlohmann::json ring_json(const std::vector<Point>& pts) {
    auto a = nlohmann::json::array();
    for (const auto& p : pts) a.push_back({p.x, p.y});
    return a;
}

std::vector<Point> ring_from(const nlohmann::json& a) {
    std::vector<Point> pts;
    for (const auto& xy : a) {
        if (!xy.is_array() || xy.size() != 2) throw FormatError("vertex must be [x, y]");
        pts.push_back({xy[0].get<double>(), xy[1].get<double>()});
    }
    return pts;
}

}  // namespace

nlohmann::json record_to_json(const AnnotationRecord& r) {
    nlohmann::json j;
    j["image_id"] = r.image_id;
    j["source_path"] = r.source_path;
    j["width"] = r.width;
    j["height"] = r.height;
    auto polys = nlohmann::json::array();
    for (const auto& p : r.polygons) polys.push_back(ring_json(p.vertices));
    j["polygons"] = polys;
    auto fb = nlohmann::json::array();
    for (const auto& pts : r.fallback_points) fb.push_back(ring_json(pts));
    j["fallback_points"] = fb;
    j["status"] = to_string(r.status);
    j["note"] = r.note;
    j["version"] = r.version;
    j["created_at"] = r.created_at;
    j["updated_at"] = r.updated_at;
    return j;
}

AnnotationRecord record_from_json(const nlohmann::json& j) {
    try {
        AnnotationRecord r;
        r.image_id = j.at("image_id").get<std::string>();
        r.source_path = j.value("source_path", "");
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
        for (const auto& ring : j.at("polygons")) {
            // Stored area is derived, so recompute it (and orientation) from the ring.
            r.polygons.push_back(geometry::make_polygon(ring_from(ring)));
        }
        if (j.contains("fallback_points"))
            for (const auto& pts : j["fallback_points"]) r.fallback_points.push_back(ring_from(pts));
        r.status = status_from_string(j.value("status", "silver"));
        r.note = j.value("note", "");
        r.version = j.value("version", 1L);
        r.created_at = j.value("created_at", "");
        r.updated_at = j.value("updated_at", "");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("annotation record: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("annotation record: ") + e.what());
    }
}

void CostModel::validate() const {
    for (double t : {t_inference, t_revision, t_tuning}) {
        if (!std::isfinite(t) || t < 0) throw ArgumentError("cost model times must be finite and >= 0");
    }
    if (n_images < 1) throw ArgumentError("cost model needs n_images >= 1");
}

double cost_per_image(const CostModel& c) {
    c.validate();
    return c.t_inference + c.t_revision + c.t_tuning / static_cast<double>(c.n_images);
}

BinaryMask rasterize(const std::vector<Polygon>& polygons, int width, int height) {
    BinaryMask m(width, height);
    for (const auto& poly : polygons) {
        if (poly.vertices.size() < 3) continue;
        double x0 = poly.vertices[0].x, x1 = x0, y0 = poly.vertices[0].y, y1 = y0;
        for (const auto& p : poly.vertices) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        const int i0 = std::max(0, static_cast<int>(std::floor(x0 - 0.5)));
        const int i1 = std::min(width - 1, static_cast<int>(std::ceil(x1 - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor(y0 - 0.5)));
        const int j1 = std::min(height - 1, static_cast<int>(std::ceil(y1 - 0.5)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i)
                if (!m.at(i, j) && geometry::contains(poly, {i + 0.5, j + 0.5})) m.at(i, j) = 1;
    }
    return m;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw ArgumentError(fmt::format("mask sizes differ: {}x{} vs {}x{}", a.width, a.height, b.width, b.height));
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool p = a.bits[i] != 0, q = b.bits[i] != 0;
        inter += p && q;
        uni += p || q;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace elseg::annotate
