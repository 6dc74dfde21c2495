#include <cmath>
#include <cstdio>

#include "elseg/autoenc.hpp"
#include "elseg/error.hpp"
#include "elseg/rng.hpp"

namespace elseg::ae {
namespace {

Shape output_shape(const LayerSpec& s, const Shape& in) {
    switch (s.kind) {
    case LayerKind::conv: {
        auto dim = [](int n, int k, int stride) { return stride == 1 ? n : (n - k) / stride + 1; };
        return {dim(in.h, s.kernel_h, s.stride_h), dim(in.w, s.kernel_w, s.stride_w), s.filters};
    }
    case LayerKind::deconv:
        if (s.out_shape) {
            return {s.out_shape->h, s.out_shape->w, s.filters};
        }
        return {in.h * s.stride_h, in.w * s.stride_w, s.filters};
    case LayerKind::flatten:
        return {1, 1, static_cast<int>(in.count())};
    case LayerKind::dense:
        if (s.out_shape) {
            return *s.out_shape;
        }
        return {1, 1, s.filters};
    }
    return {};
}

Layer make_layer(const LayerSpec& spec, const Shape& in) {
    spec.validate();
    Layer L;
    L.spec = spec;
    L.in = in;
    L.out = output_shape(spec, in);
    if (L.out.h < 1 || L.out.w < 1) {
        throw ArgumentError("layer " + to_string(spec.kind) + " produces an empty output from " + to_string(in));
    }
    if (spec.stride_h == 1) L.pad_top = (spec.kernel_h - 1) / 2;
    if (spec.stride_w == 1) L.pad_left = (spec.kernel_w - 1) / 2;
    switch (spec.kind) {
    case LayerKind::conv:
    case LayerKind::deconv:
        L.weights.assign(static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w * in.c * spec.filters, 0.0);
        L.bias.assign(static_cast<std::size_t>(spec.filters), 0.0);
        break;
    case LayerKind::dense:
        if (spec.out_shape && static_cast<int>(spec.out_shape->count()) != spec.filters) {
            throw ArgumentError("dense out_shape must hold exactly `filters` units");
        }
        L.weights.assign(in.count() * L.out.count(), 0.0);
        L.bias.assign(L.out.count(), 0.0);
        break;
    case LayerKind::flatten:
        break;
    }
    return L;
}

void init_weights(Model& m, std::uint64_t seed) {
    Rng rng(seed);
    for (Layer& L : m.layers) {
        double fan_in = 1.0;
        switch (L.spec.kind) {
        case LayerKind::conv:
            fan_in = static_cast<double>(L.spec.kernel_h) * L.spec.kernel_w * L.in.c;
            break;
        case LayerKind::deconv:
            // Each output pixel receives kernel/stride taps per input channel.
            fan_in = static_cast<double>(L.spec.kernel_h) * L.spec.kernel_w * L.in.c /
                     (static_cast<double>(L.spec.stride_h) * L.spec.stride_w);
            break;
        case LayerKind::dense:
            fan_in = static_cast<double>(L.in.count());
            break;
        case LayerKind::flatten:
            continue;
        }
        const double limit = std::sqrt(6.0 / fan_in);
        for (double& w : L.weights) {
            w = rng.uniform(-limit, limit);
        }
    }
    quantize_to_f32(m);
}

LayerSpec conv(int filters, int k, int s) {
    LayerSpec l;
    l.kind = LayerKind::conv;
    l.filters = filters;
    l.kernel_h = l.kernel_w = k;
    l.stride_h = l.stride_w = s;
    l.activation = Activation::leaky_relu;
    return l;
}

LayerSpec deconv(int filters, int k, int s, Activation a = Activation::leaky_relu) {
    LayerSpec l = conv(filters, k, s);
    l.kind = LayerKind::deconv;
    l.activation = a;
    return l;
}

LayerSpec dense(int units, std::optional<Shape> view = std::nullopt) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.filters = units;
    l.activation = Activation::leaky_relu;
    l.out_shape = view;
    return l;
}

LayerSpec flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
}

/// The encoder/decoder pattern of the segmentation autoencoder. `f` holds the seven encoder
/// filter counts; the decoder mirrors them.
std::vector<LayerSpec> topology(Shape input, const int (&f)[7], int latent) {
    const Shape bottleneck{input.h / 8, input.w / 8, f[6]};
    std::vector<LayerSpec> s{
        conv(f[0], 2, 2), conv(f[1], 2, 2), conv(f[2], 4, 1), conv(f[3], 2, 2),
        conv(f[4], 4, 1), conv(f[5], 4, 1), conv(f[6], 4, 1), flatten(),
        dense(latent), dense(static_cast<int>(bottleneck.count()), bottleneck),
        deconv(f[6], 4, 1), deconv(f[5], 4, 1), deconv(f[4], 4, 1), deconv(f[3], 2, 2),
        deconv(f[2], 4, 1), deconv(f[1], 2, 2), deconv(1, 2, 2, Activation::sigmoid),
    };
    return s;
}

}  // namespace

std::string to_string(const Shape& s) {
    return std::to_string(s.w) + "x" + std::to_string(s.h) + "x" + std::to_string(s.c);
}

std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    }
    return "unknown";
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::none: return "none";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

std::string to_string(Scale s) {
    switch (s) {
    case Scale::paper: return "paper";
    case Scale::desk: return "desk";
    case Scale::custom: return "custom";
    }
    return "unknown";
}

Scale scale_from_string(const std::string& s) {
    if (s == "paper") return Scale::paper;
    if (s == "desk") return Scale::desk;
    if (s == "custom") return Scale::custom;
    throw FormatError("unknown model scale tag '" + s + "'");
}

void LayerSpec::validate() const {
    if (kernel_h < 1 || kernel_w < 1 || stride_h < 1 || stride_w < 1) {
        throw ArgumentError("kernel and stride components must be >= 1");
    }
    if (kind != LayerKind::flatten && filters < 1) {
        throw ArgumentError("filters/units must be >= 1");
    }
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& L : layers) {
        n += L.param_count();
    }
    return n;
}

void check_shapes(const Model& m) {
    Shape cur = m.input_shape;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const Layer& L = m.layers[i];
        if (L.in != cur) {
            throw ArgumentError("layer " + std::to_string(i) + " expects " + to_string(L.in) + " but receives " +
                                to_string(cur));
        }
        cur = L.out;
    }
    if (m.scale != Scale::custom && cur != m.input_shape) {
        throw ArgumentError("decoder output " + to_string(cur) + " differs from input " + to_string(m.input_shape));
    }
}

Model build_custom(Shape input, const std::vector<LayerSpec>& specs, std::uint64_t seed, double leaky_alpha) {
    if (input.h < 1 || input.w < 1 || input.c < 1) {
        throw ArgumentError("invalid input shape");
    }
    Model m;
    m.scale = Scale::custom;
    m.input_shape = input;
    m.leaky_alpha = leaky_alpha;
    m.provenance.seed = seed;
    Shape cur = input;
    for (const auto& s : specs) {
        m.layers.push_back(make_layer(s, cur));
        cur = m.layers.back().out;
        if (s.kind == LayerKind::dense && m.latent_dim == 0) {
            m.latent_dim = s.filters;
        }
    }
    check_shapes(m);
    init_weights(m, seed);
    return m;
}

Model build_model(Scale scale, std::uint64_t seed, double leaky_alpha) {
    Model m;
    if (scale == Scale::paper) {
        static constexpr int kFilters[7] = {32, 16, 8, 16, 8, 16, 8};
        m = build_custom({480, 640, 1}, topology({480, 640, 1}, kFilters, 200), seed, leaky_alpha);
        m.latent_dim = 200;
    } else if (scale == Scale::desk) {
        static constexpr int kFilters[7] = {16, 8, 4, 8, 4, 8, 4};
        m = build_custom({64, 64, 1}, topology({64, 64, 1}, kFilters, 32), seed, leaky_alpha);
        m.latent_dim = 32;
    } else {
        throw ArgumentError("build_model: use build_custom for custom topologies");
    }
    m.scale = scale;
    check_shapes(m);
    return m;
}

void quantize_to_f32(Model& m) {
    for (Layer& L : m.layers) {
        for (double& w : L.weights) w = static_cast<double>(static_cast<float>(w));
        for (double& b : L.bias) b = static_cast<double>(static_cast<float>(b));
    }
}

void TrainConfig::validate() const {
    if (batch_size < 1 || patience < 1 || validate_every < 1 || max_epochs < 1) {
        throw ArgumentError("batch_size, patience, validate_every and max_epochs must be >= 1");
    }
    if (!(learning_rate >= 0.0) || !(leaky_alpha >= 0.0)) {
        throw ArgumentError("learning_rate and leaky_alpha must be non-negative");
    }
}

std::string TrainConfig::digest() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "lr=%.17g;bs=%d;ep=%d;ve=%d;pat=%d;alpha=%.17g;seed=%llu;b1=%.17g;b2=%.17g;eps=%.17g",
                  learning_rate, batch_size, max_epochs, validate_every, patience, leaky_alpha,
                  static_cast<unsigned long long>(seed), adam_beta1, adam_beta2, adam_eps);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = buf; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace elseg::ae
