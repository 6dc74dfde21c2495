#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "elseg/autoenc.hpp"
#include "elseg/error.hpp"

// Container layout (all integers little-endian):
//   magic "ELSEGAE\0" | u16 major | u16 minor | u32 header length | header JSON
//   | u64 parameter count | f32 parameters (per layer: weights, then bias)

namespace elseg::ae {
namespace {

constexpr std::array<char, 8> kMagic = {'E', 'L', 'S', 'E', 'G', 'A', 'E', '\0'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    Reader(const std::string& bytes, const std::filesystem::path& path) : b_(bytes), path_(path) {}

    std::uint64_t le(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string take(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) {
            throw FormatError("model file " + path_.string() + " is truncated");
        }
    }
    const std::string& b_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

nlohmann::json shape_json(const Shape& s) { return {s.h, s.w, s.c}; }

nlohmann::json header_json(const Model& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& L : m.layers) {
        layers.push_back({{"kind", to_string(L.spec.kind)},
                          {"filters", L.spec.filters},
                          {"kernel", {L.spec.kernel_h, L.spec.kernel_w}},
                          {"stride", {L.spec.stride_h, L.spec.stride_w}},
                          {"activation", to_string(L.spec.activation)},
                          {"in_shape", shape_json(L.in)},
                          {"out_shape", shape_json(L.out)},
                          {"params", L.param_count()}});
    }
    return {{"scale", to_string(m.scale)},
            {"input_shape", shape_json(m.input_shape)},
            {"latent_dim", m.latent_dim},
            {"leaky_alpha", m.leaky_alpha},
            {"layers", layers},
            {"provenance",
             {{"seed", m.provenance.seed},
              {"config_digest", m.provenance.config_digest},
              {"epochs_trained", m.provenance.epochs_trained}}}};
}

LayerKind kind_from_string(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "deconv") return LayerKind::deconv;
    if (s == "flatten") return LayerKind::flatten;
    if (s == "dense") return LayerKind::dense;
    throw FormatError("unknown layer kind '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw FormatError("unknown activation '" + s + "'");
}

Shape shape_from_json(const nlohmann::json& j) {
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

Model model_from_header(const nlohmann::json& h) {
    const Scale scale = scale_from_string(h.at("scale").get<std::string>());
    const double alpha = h.at("leaky_alpha").get<double>();
    Model m;
    if (scale == Scale::custom) {
        std::vector<LayerSpec> specs;
        for (const auto& lj : h.at("layers")) {
            LayerSpec s;
            s.kind = kind_from_string(lj.at("kind").get<std::string>());
            s.filters = lj.at("filters").get<int>();
            s.kernel_h = lj.at("kernel").at(0).get<int>();
            s.kernel_w = lj.at("kernel").at(1).get<int>();
            s.stride_h = lj.at("stride").at(0).get<int>();
            s.stride_w = lj.at("stride").at(1).get<int>();
            s.activation = activation_from_string(lj.at("activation").get<std::string>());
            if (s.kind == LayerKind::dense || s.kind == LayerKind::deconv) {
                s.out_shape = shape_from_json(lj.at("out_shape"));
            }
            specs.push_back(s);
        }
        m = build_custom(shape_from_json(h.at("input_shape")), specs, 0, alpha);
    } else {
        m = build_model(scale, 0, alpha);
    }
    m.latent_dim = h.at("latent_dim").get<int>();

    const auto& layers = h.at("layers");
    if (layers.size() != m.layers.size()) {
        throw FormatError("model topology block does not match scale '" + to_string(scale) + "'");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& L = m.layers[i];
        if (layers[i].at("kind").get<std::string>() != to_string(L.spec.kind) ||
            shape_from_json(layers[i].at("out_shape")) != L.out ||
            layers[i].at("params").get<std::size_t>() != L.param_count()) {
            throw FormatError("model topology block differs from the '" + to_string(scale) + "' layout at layer " +
                              std::to_string(i));
        }
    }
    const auto& prov = h.at("provenance");
    m.provenance.seed = prov.at("seed").get<std::uint64_t>();
    m.provenance.config_digest = prov.at("config_digest").get<std::string>();
    m.provenance.epochs_trained = prov.at("epochs_trained").get<int>();
    return m;
}

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
    std::string out(kMagic.begin(), kMagic.end());
    put_le(out, kModelFormatMajor, 2);
    put_le(out, kModelFormatMinor, 2);
    const std::string header = header_json(m).dump();
    put_le(out, header.size(), 4);
    out += header;
    put_le(out, m.param_count(), 8);
    out.reserve(out.size() + 4 * m.param_count());
    auto put_f32 = [&](double v) { put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4); };
    for (const auto& L : m.layers) {
        for (double w : L.weights) put_f32(w);
        for (double b : L.bias) put_f32(b);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot write model file " + path.string());
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw IoError("failed writing model file " + path.string());
    }
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open model file " + path.string());
    }
    const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    Reader r(bytes, path);
    if (r.take(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
        throw FormatError(path.string() + " is not a model file (bad magic)");
    }
    const auto major = r.le(2);
    const auto minor = r.le(2);
    if (major != kModelFormatMajor) {
        throw FormatError("model file version " + std::to_string(major) + "." + std::to_string(minor) +
                          " is not supported (expected major " + std::to_string(kModelFormatMajor) + ")");
    }
    const auto header_len = r.le(4);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.take(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model header is malformed: " + std::string(e.what()));
    }
    Model m;
    try {
        m = model_from_header(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model header is incomplete: " + std::string(e.what()));
    }
    const auto count = r.le(8);
    if (count != m.param_count()) {
        throw FormatError("model parameter count " + std::to_string(count) + " does not match topology (" +
                          std::to_string(m.param_count()) + ")");
    }
    auto get_f32 = [&] { return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(r.le(4)))); };
    for (auto& L : m.layers) {
        for (double& w : L.weights) w = get_f32();
        for (double& b : L.bias) b = get_f32();
    }
    if (!r.at_end()) {
        throw FormatError("trailing bytes after model parameters in " + path.string());
    }
    return m;
}

}  // namespace elseg::ae
