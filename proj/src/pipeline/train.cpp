#include <spdlog/spdlog.h>

#include "elseg/error.hpp"
#include "elseg/pipeline.hpp"

namespace elseg::pipeline {

TrainOutcome train_model(const PipelineConfig& cfg, const std::vector<Image>& raw_images,
                         const ae::EpochCallback& on_epoch) {
    cfg.validate();
    if (raw_images.size() < 2) throw ArgumentError("training needs at least 2 images");
    TrainOutcome out{ae::build_model(cfg.scale, cfg.seed, cfg.train.leaky_alpha), {}, 0, 0};
    const ae::Shape in = out.model.input_shape;

    std::vector<Image> prepared;
    prepared.reserve(raw_images.size());
    for (const auto& img : raw_images) prepared.push_back(preprocess(img, in.w, in.h));
    DatasetSplit split = split_dataset(prepared, cfg.train_fraction, cfg.seed);
    if (split.train.empty() || split.validation.empty()) {
        throw ArgumentError("split_fraction leaves an empty training or validation set");
    }
    if (cfg.augment) {
        std::vector<Image> grown;
        for (const auto& img : split.train)
            for (auto& v : augment(img)) grown.push_back(std::move(v));
        split.train = std::move(grown);
        split.train_index.clear();
    }
    out.train_images = split.train.size();
    out.validation_images = split.validation.size();
    spdlog::info("train: {} training / {} validation images, {} model", out.train_images, out.validation_images,
                 ae::to_string(cfg.scale));

    ae::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    out.report = ae::train(out.model, split, tc, cfg.loss, on_epoch);
    return out;
}

}  // namespace elseg::pipeline
