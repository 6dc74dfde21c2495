#include <chrono>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "elseg/autoenc.hpp"
#include "elseg/error.hpp"
#include "elseg/rng.hpp"

namespace elseg::ae {
namespace {

class Adam {
public:
    Adam(const Model& m, const TrainConfig& cfg)
        : cfg_(cfg), m_(Gradients::zeros_like(m)), v_(Gradients::zeros_like(m)) {}

    void step(Model& model, const Gradients& g) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            update(model.layers[l].weights, g.weights[l], m_.weights[l], v_.weights[l], bc1, bc2);
            update(model.layers[l].bias, g.bias[l], m_.bias[l], v_.bias[l], bc1, bc2);
        }
        quantize_to_f32(model);
    }

private:
    void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double bc1, double bc2) const {
        const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
    }

    TrainConfig cfg_;
    Gradients m_, v_;
    int t_ = 0;
};

double mean_loss(const Model& m, const std::vector<Tensor>& xs, const ssim::SsimParams& p) {
    double sum = 0.0;
    for (const auto& x : xs) {
        sum += loss(m, x, p);
    }
    return sum / static_cast<double>(xs.size());
}

std::vector<Tensor> to_tensors(const std::vector<Image>& imgs, const Model& m) {
    std::vector<Tensor> out;
    out.reserve(imgs.size());
    for (const auto& img : imgs) {
        Tensor t = tensor_from_image(img);
        if (t.shape != m.input_shape) {
            throw ArgumentError("train: image " + to_string(t.shape) + " does not match model input " +
                                to_string(m.input_shape));
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TrainReport train(Model& m, const DatasetSplit& data, const TrainConfig& cfg,
                  const ssim::SsimParams& loss_params, const EpochCallback& on_epoch) {
    cfg.validate();
    loss_params.validate();
    if (data.train.empty()) {
        throw ArgumentError("train: empty training set");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto train_x = to_tensors(data.train, m);
    // Without a validation split, the training set doubles as the validation set.
    const auto val_x = data.validation.empty() ? train_x : to_tensors(data.validation, m);

    m.leaky_alpha = cfg.leaky_alpha;
    Adam adam(m, cfg);
    TrainReport report;
    Model best = m;
    bool have_best = false;
    int stale = 0;

    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start_i = 0; start_i < order.size(); start_i += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end_i = std::min(order.size(), start_i + static_cast<std::size_t>(cfg.batch_size));
            Gradients g = Gradients::zeros_like(m);
            double batch_loss = 0.0;
            for (std::size_t k = start_i; k < end_i; ++k) {
                batch_loss += loss_and_gradient(m, train_x[order[k]], loss_params, g);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingDivergedError(epoch, "training diverged at epoch " + std::to_string(epoch));
            }
            const double inv = 1.0 / static_cast<double>(end_i - start_i);
            Gradients scaled = Gradients::zeros_like(m);
            scaled.add(g, inv);
            adam.step(m, scaled);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(order.size());
        report.train_loss.push_back(epoch_loss);
        report.stopped_epoch = epoch;

        std::optional<double> val_loss;
        if (epoch % cfg.validate_every == 0) {
            const double vl = mean_loss(m, val_x, loss_params);
            if (!std::isfinite(vl)) {
                throw TrainingDivergedError(epoch, "validation loss is not finite at epoch " + std::to_string(epoch));
            }
            val_loss = vl;
            report.validation.push_back({epoch, vl});
            if (!have_best || vl < report.best_validation_loss) {
                have_best = true;
                report.best_validation_loss = vl;
                report.best_epoch = epoch;
                best = m;
                stale = 0;
            } else {
                ++stale;
            }
        }
        if (on_epoch) {
            on_epoch(epoch, epoch_loss, val_loss);
        }
        if (have_best && stale >= cfg.patience) {
            report.early_stopped = true;
            break;
        }
    }

    if (!have_best) {
        // max_epochs shorter than the validation cadence: validate once at the end.
        report.best_validation_loss = mean_loss(m, val_x, loss_params);
        report.best_epoch = report.stopped_epoch;
        report.validation.push_back({report.stopped_epoch, report.best_validation_loss});
        best = m;
    }
    m = std::move(best);
    m.provenance.seed = cfg.seed;
    m.provenance.config_digest = cfg.digest();
    m.provenance.epochs_trained = report.stopped_epoch;
    report.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("train: stopped at epoch {} (best epoch {}, validation loss {:.6f})", report.stopped_epoch,
                 report.best_epoch, report.best_validation_loss);
    return report;
}

}  // namespace elseg::ae
