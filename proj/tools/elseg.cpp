// elseg command-line front end.
//
// Exit codes: 0 success, 1 runtime failure or a batch with failed images, 2 invalid
// configuration or arguments.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/pipeline.hpp"
#include "elseg/review.hpp"

namespace fs = std::filesystem;
using namespace elseg;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInvalid = 2;

struct Common {
    std::string config;
    std::string preset = "desk";
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string log_level = "info";
};

pipeline::PipelineConfig resolve(const Common& c) {
    pipeline::PipelineConfig cfg;
    if (!c.config.empty()) {
        cfg = pipeline::load_config(c.config);
    } else if (c.preset == "paper") {
        cfg = pipeline::paper_preset();
    } else if (c.preset != "desk") {
        throw ValidationError("unknown preset '" + c.preset + "' (desk or paper)");
    }
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + kv + "'");
        pipeline::set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    cfg.validate();
    return cfg;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << j.dump(2) << "\n";
}

void write_string(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << s;
}

// --- subcommands -----------------------------------------------------------

struct SynthArgs {
    std::optional<int> count;
    std::optional<double> defect_rate;
    std::vector<std::string> kinds;
    std::string out;
};

int cmd_synth(const Common& common, const SynthArgs& a) {
    const auto cfg = resolve(common);
    synth::DefectMix mix;
    if (!a.kinds.empty()) {
        mix.kinds.clear();
        for (const auto& k : a.kinds) mix.kinds.push_back(synth::defect_kind_from_string(k));
    }
    const fs::path out = a.out.empty() ? cfg.data_dir : fs::path(a.out);
    const auto items = synth::generate_dataset(a.count.value_or(cfg.synth_count),
                                               a.defect_rate.value_or(cfg.synth_defect_rate), cfg.cell, cfg.seed, mix);
    const auto manifest = synth::save_dataset(items, out, cfg.seed);
    spdlog::info("wrote {} cells to {}", items.size(), manifest.string());
    return kOk;
}

struct TrainArgs {
    std::string data;
    std::string model;
    bool include_defective = false;
};

int cmd_train(const Common& common, const TrainArgs& a) {
    const auto cfg = resolve(common);
    const fs::path data = a.data.empty() ? cfg.data_dir : fs::path(a.data);
    const fs::path model_path = a.model.empty() ? cfg.model_path : fs::path(a.model);

    std::vector<Image> images;
    const fs::path manifest = fs::is_directory(data) ? data / "manifest.json" : data;
    if (fs::is_regular_file(manifest) && manifest.extension() == ".json") {
        for (const auto& t : synth::load_truth_manifest(manifest)) {
            if (t.defective && !a.include_defective) continue;
            images.push_back(load_grayscale(t.image));
        }
    } else {
        for (const auto& in : pipeline::discover_inputs(data)) images.push_back(load_grayscale(in.path));
    }
    spdlog::info("training on {} images from {}", images.size(), data.string());

    const auto out = pipeline::train_model(cfg, images, [](int epoch, double tl, std::optional<double> vl) {
        if (vl) spdlog::info("epoch {:3d}  train {:.5f}  validation {:.5f}", epoch, tl, *vl);
    });
    if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
    ae::save_model(out.model, model_path);

    nlohmann::json report = {{"model", model_path.string()},
                             {"scale", ae::to_string(cfg.scale)},
                             {"train_images", out.train_images},
                             {"validation_images", out.validation_images},
                             {"best_epoch", out.report.best_epoch},
                             {"stopped_epoch", out.report.stopped_epoch},
                             {"early_stopped", out.report.early_stopped},
                             {"best_validation_loss", out.report.best_validation_loss},
                             {"best_validation_ssim", -out.report.best_validation_loss},
                             {"duration_seconds", out.report.duration_seconds},
                             {"train_loss", out.report.train_loss}};
    auto val = nlohmann::json::array();
    for (const auto& v : out.report.validation) val.push_back({{"epoch", v.epoch}, {"loss", v.loss}});
    report["validation"] = val;
    write_json(fs::path(model_path).replace_extension(".report.json"), report);
    spdlog::info("best validation SSIM {:.4f} at epoch {}", -out.report.best_validation_loss, out.report.best_epoch);
    return kOk;
}

struct InferArgs {
    std::string data;
    std::string model;
    std::string out;
};

int cmd_infer(const Common& common, const InferArgs& a) {
    const auto cfg = resolve(common);
    const fs::path data = a.data.empty() ? cfg.data_dir : fs::path(a.data);
    const fs::path out = a.out.empty() ? cfg.out_dir : fs::path(a.out);
    const auto model = ae::load_model(a.model.empty() ? cfg.model_path : fs::path(a.model));
    if (model.scale != cfg.scale) {
        spdlog::warn("model scale {} differs from configured {}", ae::to_string(model.scale), ae::to_string(cfg.scale));
    }
    const auto inputs = pipeline::discover_inputs(data);
    if (inputs.empty()) throw IoError("no images under " + data.string());

    const auto res = pipeline::run_infer(cfg, model, inputs);
    fs::create_directories(out / "voc");
    pipeline::write_records(res.records, out / "records.json");
    write_string(out / "annotations.coco.json", annotate::to_coco_string(res.records));
    for (const auto& r : res.records) annotate::write_voc(r, out / "voc");
    write_json(out / "timing.json", res.timing_json());
    write_string(out / "config.ini", pipeline::serialize(cfg));

    std::size_t polys = 0;
    for (const auto& r : res.records) polys += r.polygons.size();
    spdlog::info("{} images, {} polygons, {} failed, {:.3f} s/image", inputs.size(), polys, res.failures(),
                 res.mean_seconds());
    return res.failures() ? kFailed : kOk;
}

struct EvalArgs {
    std::string records;
    std::string truth;
    std::optional<double> t_inference;
    std::string timing;
    std::string out;
};

int cmd_evaluate(const Common& common, const EvalArgs& a) {
    const auto cfg = resolve(common);
    const auto records = pipeline::read_records(a.records);
    fs::path truth = a.truth;
    if (fs::is_directory(truth)) truth /= "manifest.json";
    std::optional<double> t_inf = a.t_inference;
    if (!t_inf && !a.timing.empty()) {
        std::ifstream in(a.timing);
        if (!in) throw IoError("cannot read " + a.timing);
        t_inf = nlohmann::json::parse(in).at("mean_seconds_per_image").get<double>();
    }
    const auto rep = pipeline::run_evaluate(records, synth::load_truth_manifest(truth), t_inf, cfg.t_revision,
                                            cfg.t_tuning);
    const auto j = rep.to_json();
    if (a.out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_json(a.out, j);
    }
    spdlog::info("mean IoU (defective) {:.3f}, recall {:.3f}, precision {:.3f}, clean empty {:.2f}",
                 rep.mean_iou_defective, rep.recall, rep.precision, rep.clean_empty_fraction);
    return kOk;
}

struct ServeArgs {
    std::string store;
    std::string records;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    std::optional<double> t_inference;
};

int cmd_serve(const Common& common, const ServeArgs& a) {
    const auto cfg = resolve(common);
    review::ReviewStore store(a.store);
    if (!a.records.empty()) {
        std::size_t added = 0, skipped = 0;
        for (auto& r : pipeline::read_records(a.records)) {
            try {
                const fs::path src = r.source_path;
                store.add(std::move(r), src);
                ++added;
            } catch (const ConflictError&) {
                ++skipped;
            }
        }
        spdlog::info("imported {} records ({} already present)", added, skipped);
    }

    // Block termination signals in every thread; this one waits for them.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    review::ServerOptions opt;
    opt.host = a.host;
    opt.port = a.port;
    opt.t_inference = a.t_inference.value_or(0.0);
    opt.t_tuning = cfg.t_tuning;
    opt.static_dir = a.static_dir;
    review::Server server(store, opt);
    server.start();
    std::cout << "listening on http://" << a.host << ":" << server.port() << std::endl;

    int sig = 0;
    sigwait(&sigs, &sig);
    spdlog::info("signal {}, shutting down", sig);
    server.stop();
    return kOk;
}

struct ExportArgs {
    std::string store;
    std::string format = "coco";
    std::string out;
    bool all = false;
};

int cmd_export(const Common&, const ExportArgs& a) {
    review::ReviewStore store(a.store);
    std::vector<annotate::AnnotationRecord> records;
    for (auto& [id, r] : store.snapshot()) {
        if (a.all ? r.status != annotate::Status::rejected : r.status == annotate::Status::gold) {
            records.push_back(std::move(r));
        }
    }
    if (a.format == "coco") {
        const std::string text = annotate::to_coco_string(records);
        if (a.out.empty()) {
            std::cout << text;
        } else {
            write_string(a.out, text);
        }
    } else {
        if (a.out.empty()) throw ArgumentError("voc export needs --out DIR");
        fs::create_directories(a.out);
        for (const auto& r : records) annotate::write_voc(r, a.out);
    }
    spdlog::info("exported {} records", records.size());
    return kOk;
}

int cmd_config(const Common& common, const std::string& out) {
    const std::string text = pipeline::serialize(resolve(common));
    if (out.empty()) {
        std::cout << text;
    } else {
        write_string(out, text);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic EL cell generation, anomaly-based defect annotation and review"};
    app.require_subcommand(1);
    Common common;
    app.add_option("-c,--config", common.config, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--preset", common.preset, "desk or paper, used without --config");
    app.add_option("--set", common.sets, "section.key=value override (repeatable)");
    app.add_option("--seed", common.seed, "overrides run.seed");
    app.add_option("-j,--workers", common.workers, "overrides run.workers");
    app.add_option("--log-level", common.log_level, "trace, debug, info, warn, error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    SynthArgs synth_a;
    auto* synth = app.add_subcommand("synth", "generate labelled cells");
    synth->add_option("-n,--count", synth_a.count);
    synth->add_option("--defect-rate", synth_a.defect_rate);
    synth->add_option("--kinds", synth_a.kinds, "crack, dead_patch, degradation")->delimiter(',');
    synth->add_option("-o,--out", synth_a.out);

    TrainArgs train_a;
    auto* train = app.add_subcommand("train", "train the autoencoder on defect-free cells");
    train->add_option("-d,--data", train_a.data, "dataset dir, manifest or image dir");
    train->add_option("-m,--model", train_a.model);
    train->add_flag("--include-defective", train_a.include_defective, "also train on cells marked defective");

    InferArgs infer_a;
    auto* infer = app.add_subcommand("infer", "annotate images");
    infer->add_option("-d,--data", infer_a.data);
    infer->add_option("-m,--model", infer_a.model);
    infer->add_option("-o,--out", infer_a.out);

    EvalArgs eval_a;
    auto* evaluate = app.add_subcommand("evaluate", "score records against synthetic truth");
    evaluate->add_option("-r,--records", eval_a.records)->required()->check(CLI::ExistingFile);
    evaluate->add_option("-t,--truth", eval_a.truth, "dataset dir or manifest.json")->required();
    evaluate->add_option("--t-inference", eval_a.t_inference, "seconds per image for the cost model");
    evaluate->add_option("--timing", eval_a.timing, "timing.json from infer, for the cost model");
    evaluate->add_option("-o,--out", eval_a.out);

    ServeArgs serve_a;
    auto* serve = app.add_subcommand("serve", "run the review service");
    serve->add_option("-s,--store", serve_a.store)->required();
    serve->add_option("-r,--records", serve_a.records, "records.json to import as silver");
    serve->add_option("--host", serve_a.host);
    serve->add_option("-p,--port", serve_a.port)->check(CLI::Range(0, 65535));
    serve->add_option("--static", serve_a.static_dir, "built UI assets");
    serve->add_option("--t-inference", serve_a.t_inference);

    ExportArgs export_a;
    auto* exp = app.add_subcommand("export", "export reviewed annotations");
    exp->add_option("-s,--store", export_a.store)->required()->check(CLI::ExistingDirectory);
    exp->add_option("-f,--format", export_a.format)->check(CLI::IsMember({"coco", "voc"}));
    exp->add_option("-o,--out", export_a.out);
    exp->add_flag("--all", export_a.all, "silver records too (rejected are always left out)");

    std::string config_out;
    auto* config = app.add_subcommand("config", "print the resolved configuration");
    config->add_option("-o,--out", config_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalid;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("elseg"));
    spdlog::set_level(spdlog::level::from_str(common.log_level));

    try {
        if (*synth) return cmd_synth(common, synth_a);
        if (*train) return cmd_train(common, train_a);
        if (*infer) return cmd_infer(common, infer_a);
        if (*evaluate) return cmd_evaluate(common, eval_a);
        if (*serve) return cmd_serve(common, serve_a);
        if (*exp) return cmd_export(common, export_a);
        if (*config) return cmd_config(common, config_out);
    } catch (const ValidationError& e) {
        spdlog::error("invalid configuration: {}", e.what());
        return kInvalid;
    } catch (const ArgumentError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFailed;
    }
    return kFailed;
}
