#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "elseg/error.hpp"
#include "elseg/pipeline.hpp"

namespace elseg::pipeline {

namespace fs = std::filesystem;

namespace {

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ValidationError(key + ": '" + v + "' is not a number");
    return d;
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long n = 0;
    try {
        n = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ValidationError(key + ": '" + v + "' is not an integer");
    return n;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError(key + ": '" + v + "' is not a boolean");
}

std::string num(double d) { return fmt::format("{}", d); }

struct Field {
    std::string section;
    std::string key;
    std::string comment;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

#define DBL(sec, name, member, note)                                                                   \
    Field {                                                                                            \
        sec, name, note, [](const PipelineConfig& c) { return num(c.member); },                        \
            [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); } \
    }
#define INT(sec, name, member, note)                                                                   \
    Field {                                                                                            \
        sec, name, note, [](const PipelineConfig& c) { return std::to_string(c.member); },             \
            [](PipelineConfig& c, const std::string& k, const std::string& v) {                        \
                c.member = static_cast<decltype(c.member)>(to_int(k, v));                              \
            }                                                                                          \
    }
#define PATH(sec, name, member, note)                                                                  \
    Field {                                                                                            \
        sec, name, note, [](const PipelineConfig& c) { return c.member.string(); },                    \
            [](PipelineConfig& c, const std::string&, const std::string& v) { c.member = v; }          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        INT("ssim.loss", "window", loss.window_size, "training-loss SSIM window"),
        DBL("ssim.loss", "k1", loss.k1, ""),
        DBL("ssim.loss", "k2", loss.k2, ""),
        DBL("ssim.loss", "dynamic_range", loss.dynamic_range, "1 for unit-scale images"),
        INT("ssim.disparity", "window", disparity.window_size, "disparity-map SSIM window (11 at full scale)"),
        DBL("ssim.disparity", "k1", disparity.k1, ""),
        DBL("ssim.disparity", "k2", disparity.k2, ""),
        DBL("ssim.disparity", "dynamic_range", disparity.dynamic_range, ""),
        INT("threshold", "adaptive_block", threshold.adaptive_block, "odd local-mean window (61 at full scale, 41 untuned)"),
        DBL("threshold", "adaptive_c", threshold.adaptive_c, "offset on the 0-255 scale"),
        Field{"threshold", "combine", "union or intersection of the Otsu and adaptive masks",
              [](const PipelineConfig& c) { return segment::to_string(c.threshold.combine); },
              [](PipelineConfig& c, const std::string& k, const std::string& v) {
                  try {
                      c.threshold.combine = segment::combine_mode_from_string(v);
                  } catch (const ArgumentError& e) {
                      throw ValidationError(k + ": " + e.what());
                  }
              }},
        DBL("threshold", "otsu_floor", threshold.otsu_floor, "lower bound on the Otsu threshold; 0 disables"),
        Field{"busbar", "expected_count", "0 detects the count; otherwise keep the deepest N bands",
              [](const PipelineConfig& c) { return std::to_string(c.busbar.expected_count.value_or(0)); },
              [](PipelineConfig& c, const std::string& k, const std::string& v) {
                  const auto n = to_int(k, v);
                  if (n == 0) {
                      c.busbar.expected_count.reset();
                  } else {
                      c.busbar.expected_count = static_cast<int>(n);
                  }
              }},
        DBL("busbar", "border_fraction", busbar.border_fraction, "frame width / smaller side"),
        DBL("busbar", "min_depth", busbar.min_depth, "minimum relative band depth"),
        INT("busbar", "padding", busbar.padding, "pixels added on each side of a band"),
        DBL("dbscan", "epsilon", dbscan.epsilon, "neighbourhood radius in pixels (10 tuned, 30 exploratory at full scale)"),
        INT("dbscan", "min_pts", dbscan.min_pts, "100 at full scale"),
        DBL("alpha", "alpha", alpha, "1/pixels; sqrt(2) keeps unit lattice triangles"),
        Field{"model", "scale", "paper (640x480, 15.4M parameters) or desk (64x64)",
              [](const PipelineConfig& c) { return ae::to_string(c.scale); },
              [](PipelineConfig& c, const std::string& k, const std::string& v) {
                  try {
                      c.scale = ae::scale_from_string(v);
                  } catch (const FormatError& e) {
                      throw ValidationError(k + ": " + e.what());
                  }
                  if (c.scale == ae::Scale::custom) throw ValidationError(k + ": custom models cannot be built from config");
              }},
        DBL("train", "learning_rate", train.learning_rate, "Adam"),
        INT("train", "batch_size", train.batch_size, ""),
        INT("train", "max_epochs", train.max_epochs, ""),
        INT("train", "validate_every", train.validate_every, "epochs between validation passes"),
        INT("train", "patience", train.patience, "validation passes without improvement before stopping"),
        DBL("train", "leaky_alpha", train.leaky_alpha, "LeakyReLU slope"),
        DBL("train", "adam_beta1", train.adam_beta1, ""),
        DBL("train", "adam_beta2", train.adam_beta2, ""),
        DBL("train", "adam_eps", train.adam_eps, ""),
        DBL("train", "split_fraction", train_fraction, "training share"),
        Field{"train", "augment", "flips and 180-degree rotation, x4",
              [](const PipelineConfig& c) { return std::string(c.augment ? "true" : "false"); },
              [](PipelineConfig& c, const std::string& k, const std::string& v) { c.augment = to_bool(k, v); }},
        INT("synth", "count", synth_count, "cells generated by `synth`"),
        DBL("synth", "defect_rate", synth_defect_rate, "share of cells with defects"),
        INT("synth", "width", cell.width, ""),
        INT("synth", "height", cell.height, ""),
        INT("synth", "busbar_count", cell.busbar_count, ""),
        INT("synth", "busbar_width", cell.busbar_width, ""),
        DBL("synth", "background_level", cell.background_level, ""),
        DBL("synth", "texture_amplitude", cell.texture_amplitude, ""),
        INT("synth", "texture_radius", cell.texture_radius, ""),
        DBL("synth", "corner_rounding", cell.corner_rounding, ""),
        DBL("synth", "dark_level", cell.dark_level, ""),
        DBL("cost", "t_revision", t_revision, "reviewer seconds per image"),
        DBL("cost", "t_tuning", t_tuning, "one-off seconds spent tuning"),
        INT("run", "seed", seed, ""),
        INT("run", "workers", workers, "inference threads"),
        PATH("paths", "data", data_dir, ""),
        PATH("paths", "model", model_path, ""),
        PATH("paths", "out", out_dir, ""),
    };
    return table;
}

#undef DBL
#undef INT
#undef PATH

const Field& find_field(const std::string& dotted) {
    for (const auto& f : fields())
        if (f.section + "." + f.key == dotted) return f;
    throw ValidationError("unknown config key '" + dotted + "'");
}

template <class F>
void checked(const std::string& section, F f) {
    try {
        f();
    } catch (const ArgumentError& e) {
        throw ValidationError("[" + section + "] " + e.what());
    }
}

}  // namespace

void PipelineConfig::validate() const {
    checked("ssim.loss", [&] { loss.validate(); });
    checked("ssim.disparity", [&] { disparity.validate(); });
    checked("threshold", [&] { threshold.validate(); });
    checked("busbar", [&] { busbar.validate(); });
    checked("dbscan", [&] { dbscan.validate(); });
    checked("train", [&] { train.validate(); });
    checked("synth", [&] { cell.validate(); });
    if (!(alpha > 0) || !std::isfinite(alpha)) throw ValidationError("[alpha] alpha must be positive");
    if (!(train_fraction > 0 && train_fraction < 1)) throw ValidationError("[train] split_fraction must lie in (0,1)");
    if (synth_count < 1) throw ValidationError("[synth] count must be >= 1");
    if (!(synth_defect_rate >= 0 && synth_defect_rate <= 1)) throw ValidationError("[synth] defect_rate must lie in [0,1]");
    if (!(t_revision >= 0) || !(t_tuning >= 0)) throw ValidationError("[cost] times must be >= 0");
    if (workers < 1) throw ValidationError("[run] workers must be >= 1");
    if (threshold.value_range != 1.0) throw ValidationError("[threshold] disparity intensity is unit-scale");
}

PipelineConfig paper_preset() {
    PipelineConfig c;
    c.disparity = ssim::disparity_preset();
    c.threshold = segment::ThresholdConfig{};
    c.busbar = segment::BusbarOptions{};
    c.dbscan = cluster::tuned_preset();
    c.scale = ae::Scale::paper;
    c.augment = true;
    c.cell.width = 640;
    c.cell.height = 480;
    c.cell.busbar_width = 24;
    c.cell.corner_rounding = 60.0;
    c.cell.texture_radius = 3;
    return c;
}

bool operator==(const PipelineConfig& a, const PipelineConfig& b) { return serialize(a) == serialize(b); }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.section + "." + f.key);
    return out;
}

std::string env_name(const std::string& key) {
    std::string out = "ELSEG_";
    for (char c : key) out += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void set_value(PipelineConfig& c, const std::string& key, const std::string& value) {
    find_field(key).set(c, key, value);
}

std::string serialize(const PipelineConfig& c) {
    std::ostringstream o;
    o << "# elseg pipeline configuration\n";
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            section = f.section;
            o << "\n[" << section << "]\n";
        }
        if (!f.comment.empty()) o << "# " << f.comment << "\n";
        o << f.key << " = " << f.get(c) << "\n";
    }
    return o.str();
}

PipelineConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    PipelineConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ValidationError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const std::string dotted = section + "." + key;
            find_field(dotted).set(c, dotted, value.data());
        }
    }
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    PipelineConfig c = parse_config(buf.str());
    for (const auto& key : config_keys()) {
        if (const char* v = std::getenv(env_name(key).c_str())) set_value(c, key, v);
    }
    c.validate();
    return c;
}

}  // namespace elseg::pipeline
