#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "elseg/autoenc.hpp"
#include "elseg/error.hpp"

namespace elseg::ae {
namespace {

namespace fs = std::filesystem;

LayerSpec spec(LayerKind kind, int filters, int k, int s, Activation a, std::optional<Shape> out = std::nullopt) {
    LayerSpec l;
    l.kind = kind;
    l.filters = filters;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.activation = a;
    l.out_shape = out;
    return l;
}

Tensor random_tensor(Shape s, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Tensor t(s);
    for (double& v : t.data) v = u(gen);
    return t;
}

// Full-scale output shapes (W x H x C); the second encoder stage is 320x240x16.
const std::vector<std::string> kFullShapes = {
    "320x240x32", "160x120x16", "160x120x8", "80x60x16", "80x60x8", "80x60x16", "80x60x8",
    "1x1x38400", "1x1x200", "80x60x8", "80x60x8", "80x60x16", "80x60x8", "160x120x16",
    "160x120x8", "320x240x16", "640x480x1"};

// Parameter count from shapes alone: k*k*cin*cout + cout for (de)conv, in*out + out for dense.
std::size_t count_from_shapes(const Model& m) {
    std::size_t total = 0;
    Shape prev = m.input_shape;
    for (const Layer& L : m.layers) {
        const auto& s = L.spec;
        if (s.kind == LayerKind::conv || s.kind == LayerKind::deconv) {
            total += static_cast<std::size_t>(s.kernel_h * s.kernel_w) * prev.c * L.out.c + L.out.c;
        } else if (s.kind == LayerKind::dense) {
            total += prev.count() * L.out.count() + L.out.count();
        }
        prev = L.out;
    }
    return total;
}

TEST(Topology, FullScaleShapes) {
    const Model m = build_model(Scale::paper, 1);
    EXPECT_EQ(to_string(m.input_shape), "640x480x1");
    EXPECT_EQ(m.latent_dim, 200);
    ASSERT_EQ(m.layers.size(), kFullShapes.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) EXPECT_EQ(to_string(m.layers[i].out), kFullShapes[i]) << i;
    EXPECT_EQ(m.param_count(), 15417913u);
    EXPECT_EQ(count_from_shapes(m), 15417913u);
    EXPECT_EQ(m.layers.front().spec.activation, Activation::leaky_relu);
    EXPECT_EQ(m.layers.back().spec.activation, Activation::sigmoid);
    EXPECT_NO_THROW(check_shapes(m));
}

TEST(Topology, DeskScale) {
    const Model m = build_model(Scale::desk, 1);
    EXPECT_EQ(to_string(m.input_shape), "64x64x1");
    EXPECT_EQ(m.latent_dim, 32);
    EXPECT_EQ(m.layers.back().out, m.input_shape);
    EXPECT_EQ(m.param_count(), count_from_shapes(m));
    EXPECT_EQ(m.layers.front().spec.filters, 16);
    EXPECT_NO_THROW(check_shapes(m));
}

TEST(Topology, SeededInitIsDeterministic) {
    const Model a = build_model(Scale::desk, 5), b = build_model(Scale::desk, 5), c = build_model(Scale::desk, 6);
    EXPECT_EQ(a.layers[3].weights, b.layers[3].weights);
    EXPECT_NE(a.layers[3].weights, c.layers[3].weights);
    for (const Layer& L : a.layers)
        for (double w : L.weights) EXPECT_EQ(w, static_cast<double>(static_cast<float>(w)));
}

TEST(Topology, ScaleTags) {
    EXPECT_EQ(scale_from_string("desk"), Scale::desk);
    try {
        scale_from_string("huge");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("huge"), std::string::npos);
    }
}

TEST(Forward, ShapePreservedAndInUnitRange) {
    const Model m = build_model(Scale::desk, 3);
    const Tensor y = forward(m, random_tensor(m.input_shape, 1));
    EXPECT_EQ(y.shape, m.input_shape);
    for (double v : y.data) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    EXPECT_THROW(forward(m, Tensor({32, 32, 1})), ArgumentError);
}

TEST(Forward, ZeroFinalLayerGivesHalf) {
    Model m = build_model(Scale::desk, 3);
    std::fill(m.layers.back().weights.begin(), m.layers.back().weights.end(), 0.0);
    std::fill(m.layers.back().bias.begin(), m.layers.back().bias.end(), 0.0);
    for (double v : forward(m, Tensor(m.input_shape)).data) EXPECT_EQ(v, 0.5);
}

TEST(Forward, HandComputedStrideTwoConv) {
    Model m = build_custom({4, 4, 1}, {spec(LayerKind::conv, 1, 2, 2, Activation::none)}, 0);
    m.layers[0].weights = {1, 2, 3, 4};
    m.layers[0].bias = {0};
    Tensor x({4, 4, 1});
    for (int i = 0; i < 16; ++i) x.data[i] = i;
    const Tensor y = forward(m, x);
    EXPECT_EQ(to_string(y.shape), "2x2x1");
    EXPECT_EQ(y.data, (std::vector<double>{34, 54, 114, 134}));
}

TEST(Forward, SameConvAndTransposedConvByHand) {
    // 3x3 input, 2x2 kernel, stride 1, same padding with one extra row/column after.
    Model c = build_custom({3, 3, 1}, {spec(LayerKind::conv, 1, 2, 1, Activation::none)}, 0);
    c.layers[0].weights = {1, 1, 1, 1};
    Tensor x({3, 3, 1});
    for (int i = 0; i < 9; ++i) x.data[i] = i + 1;
    EXPECT_EQ(forward(c, x).data, (std::vector<double>{12, 16, 9, 24, 28, 15, 15, 17, 9}));

    // Stride-2 transposed conv scatters each input into its own 2x2 block.
    Model d = build_custom({2, 2, 1}, {spec(LayerKind::deconv, 1, 2, 2, Activation::none)}, 0);
    d.layers[0].weights = {1, 2, 3, 4};
    Tensor z({2, 2, 1});
    z.data = {1, 10, 100, 1000};
    EXPECT_EQ(forward(d, z).data, (std::vector<double>{1, 2, 10, 20, 3, 4, 30, 40, 100, 200, 1000, 2000,
                                                       300, 400, 3000, 4000}));
}

TEST(Loss, PerfectReconstructionAndBounds) {
    const Model m = build_model(Scale::desk, 3);
    const Tensor x = random_tensor(m.input_shape, 2);
    const double l = loss(m, x, ssim::loss_preset());
    EXPECT_GT(l, -1.0);
    EXPECT_LE(l, 1.0);
    const Image img = image_from_tensor(x);
    EXPECT_NEAR(-ssim::mean_ssim(img, img, ssim::loss_preset()), -1.0, 1e-12);
}

// Every parameter of a small model covering each layer kind, checked by central differences.
TEST(Gradient, AllLayerKindsMatchFiniteDifferences) {
    const std::vector<LayerSpec> specs = {
        spec(LayerKind::conv, 2, 3, 1, Activation::leaky_relu),
        spec(LayerKind::conv, 3, 2, 2, Activation::leaky_relu),
        spec(LayerKind::flatten, 0, 1, 1, Activation::none),
        spec(LayerKind::dense, 5, 1, 1, Activation::leaky_relu),
        spec(LayerKind::dense, 32, 1, 1, Activation::leaky_relu, Shape{4, 4, 2}),
        spec(LayerKind::deconv, 2, 4, 1, Activation::leaky_relu),
        spec(LayerKind::deconv, 1, 2, 2, Activation::sigmoid),
    };
    Model m = build_custom({8, 8, 1}, specs, 11, 0.025);
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (Layer& L : m.layers)
        for (double& b : L.bias) b = u(gen);
    const Tensor x = random_tensor(m.input_shape, 9);
    const auto p = ssim::loss_preset();
    Gradients g = Gradients::zeros_like(m);
    const double base = loss_and_gradient(m, x, p, g);
    EXPECT_NEAR(base, loss(m, x, p), 1e-12);

    const double h = 1e-6;
    int checked = 0, bad = 0;
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        for (int which = 0; which < 2; ++which) {
            auto& params = which == 0 ? m.layers[li].weights : m.layers[li].bias;
            const auto& grad = which == 0 ? g.weights[li] : g.bias[li];
            for (std::size_t k = 0; k < params.size(); ++k) {
                const double keep = params[k];
                params[k] = keep + h;
                const double up = loss(m, x, p);
                params[k] = keep - h;
                const double down = loss(m, x, p);
                params[k] = keep;
                const double fd = (up - down) / (2 * h);
                ++checked;
                if (std::fabs(fd - grad[k]) > 1e-3 * std::max(std::fabs(fd), 1e-4)) {
                    ++bad;
                    ADD_FAILURE() << "layer " << li << (which ? " bias " : " weight ") << k << " fd " << fd
                                  << " analytic " << grad[k];
                }
            }
        }
    }
    EXPECT_GT(checked, 300);
    EXPECT_EQ(bad, 0);
}

DatasetSplit tiny_split(int n, unsigned seed) {
    std::vector<Image> imgs;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.3, 0.8);
    for (int i = 0; i < n; ++i) {
        Image img(64, 64);
        const double level = u(gen);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) img.at(x, y) = level + 0.1 * std::sin(x / 5.0 + i);
        imgs.push_back(img);
    }
    return split_dataset(imgs, 0.75, seed);
}

TEST(Train, FrozenModelStopsOnPatience) {
    Model m = build_model(Scale::desk, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.validate_every = 3;
    cfg.patience = 2;
    cfg.batch_size = 4;
    cfg.max_epochs = 100;
    const auto r = train(m, tiny_split(8, 1), cfg);
    EXPECT_EQ(r.stopped_epoch, 3 + 2 * 3);
    EXPECT_TRUE(r.early_stopped);
    EXPECT_EQ(r.best_epoch, 3);
    EXPECT_EQ(r.validation.size(), 3u);
}

TEST(Train, DeterministicReport) {
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.validate_every = 1;
    cfg.batch_size = 4;
    cfg.seed = 8;
    Model a = build_model(Scale::desk, 2), b = build_model(Scale::desk, 2);
    const auto split = tiny_split(8, 3);
    const auto ra = train(a, split, cfg);
    const auto rb = train(b, split, cfg);
    EXPECT_EQ(ra.train_loss, rb.train_loss);
    ASSERT_EQ(ra.validation.size(), 3u);
    double best = 1.0;
    for (const auto& v : ra.validation) {
        EXPECT_GE(v.loss, -1.0);
        EXPECT_LE(v.loss, 1.0);
        best = std::min(best, v.loss);
    }
    EXPECT_EQ(ra.best_validation_loss, best);
    EXPECT_LT(ra.train_loss.back(), ra.train_loss.front());
    // Best weights are restored.
    double restored = 0;
    for (const Image& img : split.validation) {
        restored += loss(a, tensor_from_image(img), ssim::loss_preset()) / split.validation.size();
    }
    EXPECT_NEAR(restored, best, 1e-12);
}

TEST(Train, RejectsBadInput) {
    Model m = build_model(Scale::desk, 2);
    TrainConfig cfg;
    cfg.patience = 0;
    EXPECT_THROW(train(m, tiny_split(4, 1), cfg), ArgumentError);
    DatasetSplit wrong;
    wrong.train.push_back(Image(32, 32));
    EXPECT_THROW(train(m, wrong, TrainConfig{}), ArgumentError);
    EXPECT_THROW(train(m, DatasetSplit{}, TrainConfig{}), ArgumentError);
}

TEST(Train, DivergenceReportsEpoch) {
    Model m = build_model(Scale::desk, 2);
    m.layers[0].weights[0] = std::nan("");
    TrainConfig cfg;
    cfg.max_epochs = 2;
    try {
        train(m, tiny_split(4, 1), cfg);
        FAIL();
    } catch (const TrainingDivergedError& e) {
        EXPECT_EQ(e.epoch(), 1);
    }
}

class ModelFile : public ::testing::Test {
protected:
    void SetUp() override {
        path_ = fs::temp_directory_path() / ("elseg_model_" + std::to_string(::getpid()) + ".bin");
    }
    void TearDown() override { fs::remove(path_); }
    fs::path path_;
};

TEST_F(ModelFile, RoundTripIsBitExact) {
    Model m = build_model(Scale::desk, 12);
    m.provenance.seed = 12;
    m.provenance.config_digest = TrainConfig{}.digest();
    save_model(m, path_);
    const Model back = load_model(path_);
    EXPECT_EQ(back.scale, Scale::desk);
    EXPECT_EQ(back.provenance.config_digest, m.provenance.config_digest);
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].weights, m.layers[i].weights);
        EXPECT_EQ(back.layers[i].bias, m.layers[i].bias);
    }
    const Tensor x = random_tensor(m.input_shape, 5);
    EXPECT_EQ(forward(back, x).data, forward(m, x).data);
}

TEST_F(ModelFile, CustomTopologyRoundTrip) {
    Model m = build_custom({8, 8, 1}, {spec(LayerKind::conv, 2, 2, 2, Activation::leaky_relu),
                                       spec(LayerKind::deconv, 1, 2, 2, Activation::sigmoid)}, 3);
    save_model(m, path_);
    const Model back = load_model(path_);
    const Tensor x = random_tensor(m.input_shape, 5);
    EXPECT_EQ(forward(back, x).data, forward(m, x).data);
}

TEST_F(ModelFile, TruncatedAndCorruptFiles) {
    save_model(build_model(Scale::desk, 1), path_);
    const auto size = fs::file_size(path_);
    fs::resize_file(path_, size - 7);
    EXPECT_THROW(load_model(path_), FormatError);

    save_model(build_model(Scale::desk, 1), path_);
    std::string bytes;
    {
        std::ifstream in(path_, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    const auto pos = bytes.find("\"desk\"");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 6, "\"dusk\"");
    std::ofstream(path_, std::ios::binary) << bytes;
    try {
        load_model(path_);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("dusk"), std::string::npos);
    }

    bytes[8] = 9;  // major version
    std::ofstream(path_, std::ios::binary) << bytes;
    EXPECT_THROW(load_model(path_), FormatError);
    EXPECT_THROW(load_model(path_.string() + ".missing"), IoError);
}

TEST(Config, DigestAndValidation) {
    TrainConfig a, b;
    EXPECT_EQ(a.digest(), b.digest());
    b.learning_rate = 0.001;
    EXPECT_NE(a.digest(), b.digest());
    EXPECT_EQ(a.learning_rate, 0.003);
    EXPECT_EQ(a.batch_size, 16);
    EXPECT_EQ(a.patience, 10);
    EXPECT_EQ(a.validate_every, 5);
    EXPECT_EQ(a.leaky_alpha, 0.025);
    EXPECT_EQ(a.max_epochs, 200);
}

}  // namespace
}  // namespace elseg::ae
