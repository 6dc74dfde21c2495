#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "elseg/annotate.hpp"
#include "elseg/error.hpp"

namespace elseg::annotate {

namespace {

void emit(const nlohmann::json& j, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(2 * depth), ' ');
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            // nlohmann::json keeps object keys in a std::map, so iteration is sorted.
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + nlohmann::json(it.key()).dump() + ": ";
                emit(it.value(), depth + 1, out);
            }
            out += "\n" + close + "}";
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            const bool flat = std::none_of(j.begin(), j.end(), [](const auto& v) { return v.is_structured(); });
            if (flat) {
                out += "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out += ", ";
                    emit(j[i], depth + 1, out);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += pad;
                emit(j[i], depth + 1, out);
            }
            out += "\n" + close + "]";
            return;
        }
        case nlohmann::json::value_t::number_float: {
            double v = j.get<double>();
            if (!std::isfinite(v)) throw ValidationError("non-finite number in JSON output");
            std::string s = fmt::format("{:.6f}", v);
            if (s == "-0.000000") s = "0.000000";
            out += s;
            return;
        }
        default:
            out += j.dump();
    }
}

double q6(double v) {
    const double r = std::round(v * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r;
}

}  // namespace

std::string dump_stable(const nlohmann::json& j) {
    std::string out;
    emit(j, 0, out);
    out += "\n";
    return out;
}

nlohmann::json to_coco(std::vector<AnnotationRecord> records, const std::vector<Category>& categories) {
    if (categories.empty()) throw ArgumentError("COCO export needs at least one category");
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.image_id).second) throw ValidationError("duplicate image id " + r.image_id);
        validate_record(r);
    }
    std::sort(records.begin(), records.end(),
              [](const AnnotationRecord& a, const AnnotationRecord& b) { return a.image_id < b.image_id; });

    auto images = nlohmann::json::array();
    auto annotations = nlohmann::json::array();
    long ann_id = 1;
    long skipped = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        const long img_id = static_cast<long>(k) + 1;
        images.push_back({{"id", img_id},
                          {"file_name", r.source_path.empty() ? r.image_id : r.source_path},
                          {"elseg_image_id", r.image_id},
                          {"width", r.width},
                          {"height", r.height}});
        skipped += static_cast<long>(r.fallback_points.size());
        for (const auto& poly : r.polygons) {
            std::vector<Point> ring;
            for (const auto& p : poly.vertices) ring.push_back({q6(p.x), q6(p.y)});
            auto seg = nlohmann::json::array();
            double x0 = ring[0].x, x1 = x0, y0 = ring[0].y, y1 = y0;
            for (const auto& p : ring) {
                seg.push_back(p.x);
                seg.push_back(p.y);
                x0 = std::min(x0, p.x);
                x1 = std::max(x1, p.x);
                y0 = std::min(y0, p.y);
                y1 = std::max(y1, p.y);
            }
            annotations.push_back({{"id", ann_id++},
                                   {"image_id", img_id},
                                   {"category_id", categories.front().id},
                                   {"segmentation", nlohmann::json::array({seg})},
                                   {"area", std::fabs(geometry::signed_area(ring))},
                                   {"bbox", {x0, y0, x1 - x0, y1 - y0}},
                                   {"iscrowd", 0}});
        }
    }
    if (skipped) spdlog::debug("COCO export skipped {} point-only clusters", skipped);

    auto cats = nlohmann::json::array();
    for (const auto& c : categories) cats.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
    return {{"info", {{"description", "elseg defect annotations"}, {"version", "1.0"}}},
            {"images", images},
            {"annotations", annotations},
            {"categories", cats}};
}

std::string to_coco_string(const std::vector<AnnotationRecord>& records, const std::vector<Category>& categories) {
    return dump_stable(to_coco(records, categories));
}

std::vector<AnnotationRecord> from_coco(const nlohmann::json& doc) {
    try {
        std::vector<AnnotationRecord> out;
        std::map<long, std::size_t> by_id;
        for (const auto& im : doc.at("images")) {
            AnnotationRecord r;
            r.image_id = im.contains("elseg_image_id") ? im["elseg_image_id"].get<std::string>()
                                                       : std::to_string(im.at("id").get<long>());
            r.source_path = im.at("file_name").get<std::string>();
            if (r.source_path == r.image_id) r.source_path.clear();
            r.width = im.at("width").get<int>();
            r.height = im.at("height").get<int>();
            by_id[im.at("id").get<long>()] = out.size();
            out.push_back(std::move(r));
        }
        for (const auto& an : doc.at("annotations")) {
            const auto it = by_id.find(an.at("image_id").get<long>());
            if (it == by_id.end()) throw FormatError("annotation refers to unknown image");
            for (const auto& seg : an.at("segmentation")) {
                if (seg.size() % 2 != 0) throw FormatError("odd coordinate count in segmentation");
                std::vector<Point> ring;
                for (std::size_t i = 0; i < seg.size(); i += 2) ring.push_back({seg[i].get<double>(), seg[i + 1].get<double>()});
                out[it->second].polygons.push_back(geometry::make_polygon(std::move(ring)));
            }
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("COCO document: ") + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError(std::string("COCO document: ") + e.what());
    }
}

}  // namespace elseg::annotate
