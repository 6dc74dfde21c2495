#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "elseg/error.hpp"
#include "elseg/pipeline.hpp"

namespace elseg::pipeline {

using annotate::AnnotationRecord;

BinaryMask prediction_mask(const AnnotationRecord& r) {
    BinaryMask m = annotate::rasterize(r.polygons, r.width, r.height);
    for (const auto& pts : r.fallback_points) {
        for (const auto& p : pts) {
            const int x = static_cast<int>(std::floor(p.x)), y = static_cast<int>(std::floor(p.y));
            if (m.in_bounds(x, y)) m.at(x, y) = 1;
        }
    }
    return m;
}

namespace {

bool intersects(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] && b.bits[i]) return true;
    return false;
}

void merge_into(BinaryMask& dst, const BinaryMask& src) {
    for (std::size_t i = 0; i < dst.bits.size(); ++i) dst.bits[i] |= src.bits[i];
}

}  // namespace

std::vector<BinaryMask> truth_instances(const synth::TruthEntry& t, const BinaryMask& gt) {
    if (!t.spec || t.defects.empty() || t.spec->width != gt.width || t.spec->height != gt.height) {
        return connected_components(gt);
    }
    std::vector<BinaryMask> out;
    for (const auto& d : t.defects) {
        BinaryMask m = synth::defect_footprint(*t.spec, d);
        for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] &= gt.bits[i];
        if (!m.none()) out.push_back(std::move(m));
    }
    return out;
}

EvalReport run_evaluate(const std::vector<AnnotationRecord>& records, const std::vector<synth::TruthEntry>& truth,
                        std::optional<double> t_inference, double t_revision, double t_tuning) {
    std::map<std::string, const AnnotationRecord*> by_id;
    for (const auto& r : records) {
        if (!by_id.emplace(r.image_id, &r).second) throw ValidationError("duplicate record id " + r.image_id);
    }
    if (by_id.size() != truth.size()) {
        throw ValidationError(fmt::format("{} records but {} truth entries", by_id.size(), truth.size()));
    }

    EvalReport rep;
    std::size_t n_truth = 0, n_found = 0, n_pred = 0, n_match = 0, n_clean = 0, n_clean_empty = 0, n_defective = 0;
    double iou_sum = 0, iou_def_sum = 0;
    for (const auto& t : truth) {
        const auto it = by_id.find(t.id);
        if (it == by_id.end()) throw ValidationError("no record for truth image " + t.id);
        const AnnotationRecord& r = *it->second;
        const BinaryMask gt = image_to_mask(load_grayscale(t.mask));
        if (gt.width != r.width || gt.height != r.height) {
            throw ValidationError(fmt::format("{}: record is {}x{}, truth mask {}x{}", t.id, r.width, r.height,
                                              gt.width, gt.height));
        }
        ImageScore s;
        s.id = t.id;
        s.defective = !gt.none();
        s.iou = annotate::mask_iou(prediction_mask(r), gt);

        std::vector<BinaryMask> polys;
        for (const auto& p : r.polygons) polys.push_back(annotate::rasterize({p}, r.width, r.height));
        std::vector<bool> matched(polys.size(), false);
        const auto components = truth_instances(t, gt);
        for (const auto& comp : components) {
            BinaryMask touching(r.width, r.height);
            std::vector<std::size_t> idx;
            for (std::size_t k = 0; k < polys.size(); ++k) {
                if (intersects(polys[k], comp)) {
                    merge_into(touching, polys[k]);
                    idx.push_back(k);
                }
            }
            if (!idx.empty() && annotate::mask_iou(touching, comp) >= 0.5) {
                ++s.detected_components;
                for (auto k : idx) matched[k] = true;
            }
        }
        s.truth_components = components.size();
        s.predicted_polygons = polys.size();
        s.matched_polygons = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), true));

        n_truth += s.truth_components;
        n_found += s.detected_components;
        n_pred += s.predicted_polygons;
        n_match += s.matched_polygons;
        iou_sum += s.iou;
        if (s.defective) {
            ++n_defective;
            iou_def_sum += s.iou;
        } else {
            ++n_clean;
            n_clean_empty += r.polygons.empty() && r.fallback_points.empty();
        }
        rep.images.push_back(s);
    }
    const auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / b : 1.0; };
    rep.mean_iou = truth.empty() ? 1.0 : iou_sum / static_cast<double>(truth.size());
    rep.mean_iou_defective = n_defective ? iou_def_sum / static_cast<double>(n_defective) : 1.0;
    rep.precision = ratio(n_match, n_pred);
    rep.recall = ratio(n_found, n_truth);
    rep.clean_empty_fraction = ratio(n_clean_empty, n_clean);
    if (t_inference) {
        rep.cost = annotate::CostModel{*t_inference, t_revision, t_tuning,
                                       std::max<long>(1, static_cast<long>(truth.size()))};
        rep.cost->validate();
    }
    return rep;
}

nlohmann::json EvalReport::to_json() const {
    auto per = nlohmann::json::array();
    for (const auto& s : images) {
        per.push_back({{"id", s.id},
                       {"defective", s.defective},
                       {"iou", s.iou},
                       {"truth_components", s.truth_components},
                       {"detected_components", s.detected_components},
                       {"predicted_polygons", s.predicted_polygons},
                       {"matched_polygons", s.matched_polygons}});
    }
    nlohmann::json j = {{"images", per},
                        {"mean_iou", mean_iou},
                        {"mean_iou_defective", mean_iou_defective},
                        {"precision", precision},
                        {"recall", recall},
                        {"clean_empty_fraction", clean_empty_fraction}};
    if (cost) {
        j["cost"] = {{"t_inference", cost->t_inference},
                     {"t_revision", cost->t_revision},
                     {"t_tuning", cost->t_tuning},
                     {"n_images", cost->n_images},
                     {"cost_per_image", annotate::cost_per_image(*cost)}};
    } else {
        j["cost"] = nullptr;
    }
    return j;
}

}  // namespace elseg::pipeline
