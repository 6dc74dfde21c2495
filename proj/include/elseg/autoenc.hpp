#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "elseg/imagecore.hpp"
#include "elseg/ssim.hpp"

namespace elseg::ae {

struct Shape {
    int h = 0;
    int w = 0;
    int c = 0;
    std::size_t count() const { return static_cast<std::size_t>(h) * w * c; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);  // "WxHxC", the layout of the topology tables

/// Row-major (y, x, channel) activations.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.count(), fill) {}

    double& at(int y, int x, int ch) {
        return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + ch];
    }
    double at(int y, int x, int ch) const {
        return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + ch];
    }
};

Tensor tensor_from_image(const Image& img);
Image image_from_tensor(const Tensor& t);

enum class LayerKind { conv, deconv, flatten, dense };
enum class Activation { none, leaky_relu, sigmoid };

std::string to_string(LayerKind k);
std::string to_string(Activation a);

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    /// Output channels (conv/deconv) or units (dense).
    int filters = 0;
    int kernel_h = 1, kernel_w = 1;
    int stride_h = 1, stride_w = 1;
    Activation activation = Activation::none;
    /// Dense: optional (h, w, c) view of the units; deconv: forced output size.
    std::optional<Shape> out_shape;

    void validate() const;
};

struct Layer {
    LayerSpec spec;
    Shape in;
    Shape out;
    int pad_top = 0, pad_left = 0;
    /// conv/deconv: [kh][kw][in_c][out_c]; dense: [in][out].
    std::vector<double> weights;
    std::vector<double> bias;

    std::size_t param_count() const { return weights.size() + bias.size(); }
};

enum class Scale { paper, desk, custom };

std::string to_string(Scale s);
/// Throws FormatError naming the tag for anything but "paper", "desk" or "custom".
Scale scale_from_string(const std::string& s);

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_digest;
    int epochs_trained = 0;
};

struct Model {
    Scale scale = Scale::custom;
    Shape input_shape;
    int latent_dim = 0;
    double leaky_alpha = 0.025;
    std::vector<Layer> layers;
    Provenance provenance;

    std::size_t param_count() const;
};

/// `paper`: 640x480x1 input, latent 200. `desk`: 64x64x1, latent 32, filters halved.
Model build_model(Scale scale, std::uint64_t seed, double leaky_alpha = 0.025);
/// Builds any stack of the supported layer kinds; shapes are walked and checked.
Model build_custom(Shape input, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                   double leaky_alpha = 0.025);
/// Throws ArgumentError if consecutive layer shapes do not compose.
void check_shapes(const Model& m);

/// Activations recorded during forward for backprop.
struct Trace {
    std::vector<Tensor> inputs;   // per layer
    std::vector<Tensor> preact;   // per layer, before activation
    Tensor output;
};

Tensor forward(const Model& m, const Tensor& x);
Tensor forward(const Model& m, const Tensor& x, Trace& trace);

/// Parameter gradients, laid out like the model's layers.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    static Gradients zeros_like(const Model& m);
    void add(const Gradients& o, double scale = 1.0);
};

/// Backpropagates dL/d(output); accumulates into grads and returns dL/d(input).
Tensor backward(const Model& m, const Trace& trace, const Tensor& d_output, Gradients& grads);

/// -mean_ssim(x, forward(m, x)).
double loss(const Model& m, const Tensor& x, const ssim::SsimParams& p);
/// Loss plus accumulated parameter gradients.
double loss_and_gradient(const Model& m, const Tensor& x, const ssim::SsimParams& p, Gradients& grads);

struct TrainConfig {
    double learning_rate = 0.003;
    int batch_size = 16;
    int max_epochs = 200;
    int validate_every = 5;
    int patience = 10;
    double leaky_alpha = 0.025;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    /// Stable FNV-1a digest of the fields above.
    std::string digest() const;
};

struct ValidationPoint {
    int epoch = 0;
    double loss = 0.0;
};

struct TrainReport {
    std::vector<double> train_loss;           // one per epoch
    std::vector<ValidationPoint> validation;  // one per validation phase
    int stopped_epoch = 0;
    int best_epoch = 0;
    double best_validation_loss = 0.0;
    double duration_seconds = 0.0;
    bool early_stopped = false;
};

using EpochCallback = std::function<void(int epoch, double train_loss, std::optional<double> val_loss)>;

/// Adam on mini-batches; leaves the best-validation weights in m.
TrainReport train(Model& m, const DatasetSplit& data, const TrainConfig& cfg,
                  const ssim::SsimParams& loss_params = ssim::loss_preset(),
                  const EpochCallback& on_epoch = {});

void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

inline constexpr std::uint16_t kModelFormatMajor = 1;
inline constexpr std::uint16_t kModelFormatMinor = 0;

/// Rounds every parameter to the nearest float32 so files round-trip bit-exactly.
void quantize_to_f32(Model& m);

}  // namespace elseg::ae
