#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/geometry.hpp"
#include "elseg/pipeline.hpp"

namespace elseg::pipeline {

namespace fs = std::filesystem;
using annotate::AnnotationRecord;

annotate::AnnotationRecord annotate_image(const PipelineConfig& cfg, const ae::Model& model, const Image& raw,
                                          const std::string& id, Stages* stages) {
    check_pipeline_dims(raw);
    const ae::Shape in = model.input_shape;
    Stages local;
    Stages& s = stages ? *stages : local;

    s.input = preprocess(raw, in.w, in.h);
    s.reconstruction = ae::image_from_tensor(ae::forward(model, ae::tensor_from_image(s.input)));
    s.disparity = segment::disparity_intensity(ssim::ssim_map(s.input, s.reconstruction, cfg.disparity));
    s.threshold = segment::threshold_disparity(s.disparity, cfg.threshold);
    s.busbars = segment::detect_busbars(s.input, cfg.busbar);
    s.cleaned = segment::clean_noise(s.threshold, s.busbars);

    std::vector<Point> pts = segment::mask_to_points(s.cleaned);
    for (auto& p : pts) {
        p.x += 0.5;
        p.y += 0.5;
    }
    s.clusters = cluster::dbscan(pts, cfg.dbscan);

    AnnotationRecord r;
    r.image_id = id;
    r.width = raw.width;
    r.height = raw.height;
    r.created_at = r.updated_at = annotate::utc_timestamp();
    const double sx = static_cast<double>(raw.width) / in.w, sy = static_cast<double>(raw.height) / in.h;
    auto to_raw = [&](Point p) { return Point{p.x * sx, p.y * sy}; };

    for (const auto& c : s.clusters.clusters) {
        std::vector<geometry::Polygon> polys;
        try {
            polys = geometry::alpha_shape(c.points, cfg.alpha);
            if (polys.empty()) {
                spdlog::debug("{}: no triangle within 1/alpha for a {}-point cluster, using its hull", id,
                              c.points.size());
                polys.push_back(geometry::convex_hull(c.points));
            }
        } catch (const DegenerateGeometryError&) {
            std::vector<Point> raw_pts;
            for (const auto& p : c.points) raw_pts.push_back(to_raw(p));
            r.fallback_points.push_back(std::move(raw_pts));
            continue;
        }
        for (auto& poly : polys) {
            std::vector<Point> ring;
            for (const auto& v : poly.vertices) ring.push_back(to_raw(v));
            r.polygons.push_back(geometry::make_polygon(std::move(ring)));
        }
    }
    annotate::validate_record(r);
    return r;
}

std::size_t InferResult::failures() const {
    return static_cast<std::size_t>(
        std::count_if(timing.begin(), timing.end(), [](const ImageTiming& t) { return t.error.has_value(); }));
}

double InferResult::mean_seconds() const {
    double total = 0;
    std::size_t n = 0;
    for (const auto& t : timing) {
        if (!t.error) {
            total += t.seconds;
            ++n;
        }
    }
    return n ? total / static_cast<double>(n) : 0.0;
}

nlohmann::json InferResult::timing_json() const {
    auto per = nlohmann::json::array();
    for (const auto& t : timing) {
        nlohmann::json j = {{"id", t.id}, {"seconds", t.seconds}, {"polygons", t.polygons}};
        j["error"] = t.error ? nlohmann::json(*t.error) : nlohmann::json(nullptr);
        per.push_back(j);
    }
    return {{"images", timing.size()},
            {"failed", failures()},
            {"workers", workers},
            {"total_seconds", total_seconds},
            {"mean_seconds_per_image", mean_seconds()},
            {"per_image", per}};
}

InferResult run_infer(const PipelineConfig& cfg, const ae::Model& model, const std::vector<InferInput>& inputs) {
    cfg.validate();
    InferResult res;
    res.workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(1, inputs.size()))));
    res.timing.resize(inputs.size());
    std::vector<std::optional<AnnotationRecord>> slots(inputs.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            const auto t0 = std::chrono::steady_clock::now();
            ImageTiming& t = res.timing[i];
            t.id = inputs[i].id;
            try {
                AnnotationRecord r = annotate_image(cfg, model, load_grayscale(inputs[i].path), inputs[i].id);
                r.source_path = inputs[i].path.string();
                t.polygons = r.polygons.size();
                slots[i] = std::move(r);
            } catch (const std::exception& e) {
                t.error = e.what();
                spdlog::warn("{}: {}", inputs[i].id, e.what());
            }
            t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> pool;
    for (int w = 1; w < res.workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    res.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (auto& s : slots)
        if (s) res.records.push_back(std::move(*s));
    return res;
}

std::vector<InferInput> discover_inputs(const fs::path& where) {
    fs::path manifest;
    if (fs::is_regular_file(where) && where.extension() == ".json") {
        manifest = where;
    } else if (fs::is_directory(where) && fs::exists(where / "manifest.json")) {
        manifest = where / "manifest.json";
    }
    std::vector<InferInput> out;
    if (!manifest.empty()) {
        for (const auto& e : synth::load_truth_manifest(manifest)) out.push_back({e.id, e.image});
        return out;
    }
    if (!fs::is_directory(where)) throw IoError("no images at " + where.string());
    for (const auto& f : fs::directory_iterator(where)) {
        const auto ext = f.path().extension().string();
        if (f.is_regular_file() && (ext == ".png" || ext == ".pgm")) out.push_back({f.path().stem().string(), f.path()});
    }
    std::sort(out.begin(), out.end(), [](const InferInput& a, const InferInput& b) { return a.path < b.path; });
    return out;
}

void write_records(const std::vector<AnnotationRecord>& records, const fs::path& path) {
    auto arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(annotate::record_to_json(r));
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << arr.dump(2) << "\n";
}

std::vector<AnnotationRecord> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    std::vector<AnnotationRecord> out;
    for (const auto& j : arr) out.push_back(annotate::record_from_json(j));
    return out;
}

}  // namespace elseg::pipeline
