#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "elseg/annotate.hpp"
#include "elseg/error.hpp"

#ifndef ELSEG_SCHEMA_DIR
#define ELSEG_SCHEMA_DIR "schemas"
#endif

namespace elseg::annotate {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string local_name(const std::string& qname) {
    const auto p = qname.find(':');
    return p == std::string::npos ? qname : qname.substr(p + 1);
}

bool is_meta(const std::string& key) { return key == "<xmlattr>" || key == "<xmlcomment>"; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

BBox voc_bbox(const Polygon& p) {
    if (p.vertices.empty()) throw ArgumentError("empty polygon has no bounding box");
    double x0 = p.vertices[0].x, x1 = x0, y0 = p.vertices[0].y, y1 = y0;
    for (const auto& v : p.vertices) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    return {std::lround(x0), std::lround(y0), std::lround(x1), std::lround(y1)};
}

std::string to_voc(const AnnotationRecord& r, const ImageMeta& meta) {
    validate_record(r);
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<annotation xmlns:elseg=\"" << kVocPolygonNamespace << "\">\n";
    o << "  <folder>" << xml_escape(meta.folder) << "</folder>\n";
    const std::string filename = meta.filename.empty() ? fs::path(r.source_path).filename().string() : meta.filename;
    o << "  <filename>" << xml_escape(filename.empty() ? r.image_id : filename) << "</filename>\n";
    if (!r.source_path.empty()) o << "  <path>" << xml_escape(r.source_path) << "</path>\n";
    o << "  <source>\n    <database>elseg</database>\n  </source>\n";
    o << "  <size>\n    <width>" << r.width << "</width>\n    <height>" << r.height << "</height>\n    <depth>"
      << meta.depth << "</depth>\n  </size>\n";
    o << "  <segmented>" << (r.polygons.empty() ? 0 : 1) << "</segmented>\n";
    for (const auto& poly : r.polygons) {
        const BBox b = voc_bbox(poly);
        o << "  <object>\n    <name>defect</name>\n    <pose>Unspecified</pose>\n    <truncated>0</truncated>\n"
          << "    <difficult>0</difficult>\n";
        o << "    <bndbox>\n      <xmin>" << b.xmin << "</xmin>\n      <ymin>" << b.ymin << "</ymin>\n      <xmax>"
          << b.xmax << "</xmax>\n      <ymax>" << b.ymax << "</ymax>\n    </bndbox>\n";
        o << "    <elseg:polygon>\n";
        for (const auto& v : poly.vertices) o << fmt::format("      <elseg:pt x=\"{:.6f}\" y=\"{:.6f}\"/>\n", v.x, v.y);
        o << "    </elseg:polygon>\n  </object>\n";
    }
    o << "</annotation>\n";
    return o.str();
}

fs::path write_voc(const AnnotationRecord& r, const fs::path& dir) {
    const std::string stem = r.source_path.empty() ? r.image_id : fs::path(r.source_path).stem().string();
    ImageMeta meta;
    meta.filename = r.source_path.empty() ? r.image_id : fs::path(r.source_path).filename().string();
    const std::string xml = to_voc(r, meta);
    fs::create_directories(dir);
    const fs::path out = dir / (stem + ".xml");
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out.string());
    f << xml;
    if (!f) throw IoError("write failed: " + out.string());
    return out;
}

fs::path voc_schema_path() { return fs::path(ELSEG_SCHEMA_DIR) / "voc_annotation.xsd"; }

// Schema subset --------------------------------------------------------------

namespace {

struct AttrDecl {
    std::string name;
    std::string type;
    bool required = false;
};

struct Decl {
    std::string name;
    std::string type;  // simple type; empty for complex
    bool complex = false;
    bool any = false;
    std::string any_namespace = "##any";
    int min = 1;
    int max = 1;  // -1 = unbounded
    std::vector<Decl> children;
    std::vector<AttrDecl> attrs;
};

const std::vector<std::string> kSimpleTypes = {"string",  "integer", "nonNegativeInteger", "positiveInteger",
                                               "decimal", "double",  "boolean"};

std::string attr(const pt::ptree& node, const std::string& name, const std::string& fallback = "") {
    return node.get<std::string>("<xmlattr>." + name, fallback);
}

int occurs(const std::string& s, int fallback) {
    if (s.empty()) return fallback;
    if (s == "unbounded") return -1;
    return std::stoi(s);
}

std::string simple_type(const std::string& qname) {
    const std::string t = local_name(qname);
    if (std::find(kSimpleTypes.begin(), kSimpleTypes.end(), t) == kSimpleTypes.end()) {
        throw FormatError("schema uses unsupported type '" + qname + "'");
    }
    return t;
}

Decl parse_element(const pt::ptree& node);

void parse_complex(const pt::ptree& ct, Decl& d) {
    d.complex = true;
    for (const auto& [key, child] : ct) {
        if (is_meta(key)) continue;
        const std::string k = local_name(key);
        if (k == "sequence") {
            for (const auto& [pk, particle] : child) {
                if (is_meta(pk)) continue;
                const std::string p = local_name(pk);
                if (p == "element") {
                    d.children.push_back(parse_element(particle));
                } else if (p == "any") {
                    Decl a;
                    a.any = true;
                    a.any_namespace = attr(particle, "namespace", "##any");
                    a.min = occurs(attr(particle, "minOccurs"), 1);
                    a.max = occurs(attr(particle, "maxOccurs"), 1);
                    d.children.push_back(a);
                } else {
                    throw FormatError("schema construct <" + pk + "> is not supported");
                }
            }
        } else if (k == "attribute") {
            d.attrs.push_back({attr(child, "name"), simple_type(attr(child, "type", "xs:string")),
                               attr(child, "use") == "required"});
        } else if (k != "annotation") {
            throw FormatError("schema construct <" + key + "> is not supported");
        }
    }
}

Decl parse_element(const pt::ptree& node) {
    Decl d;
    d.name = attr(node, "name");
    if (d.name.empty()) throw FormatError("schema element without a name");
    d.min = occurs(attr(node, "minOccurs"), 1);
    d.max = occurs(attr(node, "maxOccurs"), 1);
    const std::string type = attr(node, "type");
    if (!type.empty()) {
        d.type = simple_type(type);
        return d;
    }
    bool found = false;
    for (const auto& [key, child] : node) {
        if (local_name(key) == "complexType") {
            parse_complex(child, d);
            found = true;
        }
    }
    if (!found) d.type = "string";
    return d;
}

bool value_matches(const std::string& type, const std::string& raw) {
    const std::string v = trim(raw);
    static const std::regex integer(R"([+-]?[0-9]+)"), non_neg(R"(\+?[0-9]+)"),
        decimal(R"([+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+))"),
        dbl(R"([+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?|INF|-INF|NaN)");
    if (type == "string") return true;
    if (type == "integer") return std::regex_match(v, integer);
    if (type == "nonNegativeInteger") return std::regex_match(v, non_neg);
    if (type == "positiveInteger") return std::regex_match(v, non_neg) && v.find_first_not_of("+0") != std::string::npos;
    if (type == "decimal") return std::regex_match(v, decimal);
    if (type == "double") return std::regex_match(v, dbl);
    if (type == "boolean") return v == "true" || v == "false" || v == "1" || v == "0";
    return false;
}

class Validator {
public:
    std::vector<std::string> errors;

    void element(const std::string& path, const pt::ptree& node, const Decl& d) {
        check_attrs(path, node, d);
        std::vector<std::pair<std::string, const pt::ptree*>> kids;
        for (const auto& [key, child] : node)
            if (!is_meta(key)) kids.emplace_back(key, &child);

        if (!d.complex) {
            if (!kids.empty()) errors.push_back(path + ": simple element has child <" + kids.front().first + ">");
            if (!value_matches(d.type, node.data()))
                errors.push_back(path + ": '" + trim(node.data()) + "' is not a valid " + d.type);
            return;
        }
        if (!trim(node.data()).empty()) errors.push_back(path + ": unexpected text content");

        std::size_t i = 0;
        for (const Decl& particle : d.children) {
            int count = 0;
            while (i < kids.size() && (particle.max < 0 || count < particle.max) && matches(particle, kids[i].first)) {
                if (!particle.any) {
                    element(path + "/" + kids[i].first + "[" + std::to_string(count + 1) + "]", *kids[i].second,
                            particle);
                }
                ++i;
                ++count;
            }
            if (count < particle.min) {
                errors.push_back(path + ": expected <" + (particle.any ? std::string("any") : particle.name) + ">" +
                                 (i < kids.size() ? " before <" + kids[i].first + ">" : ""));
            }
        }
        for (; i < kids.size(); ++i) errors.push_back(path + ": unexpected element <" + kids[i].first + ">");
    }

private:
    static bool matches(const Decl& particle, const std::string& qname) {
        if (!particle.any) return qname == particle.name;
        const bool qualified = qname.find(':') != std::string::npos;
        if (particle.any_namespace == "##other") return qualified;
        if (particle.any_namespace == "##local") return !qualified;
        return true;
    }

    void check_attrs(const std::string& path, const pt::ptree& node, const Decl& d) {
        const auto present = node.get_child_optional("<xmlattr>");
        if (present) {
            for (const auto& [name, value] : *present) {
                if (name == "xmlns" || name.rfind("xmlns:", 0) == 0) continue;
                const auto it = std::find_if(d.attrs.begin(), d.attrs.end(),
                                             [&](const AttrDecl& a) { return a.name == name; });
                if (it == d.attrs.end()) {
                    errors.push_back(path + ": undeclared attribute '" + name + "'");
                } else if (!value_matches(it->type, value.data())) {
                    errors.push_back(path + ": attribute '" + name + "' is not a valid " + it->type);
                }
            }
        }
        for (const auto& a : d.attrs)
            if (a.required && !node.get_optional<std::string>("<xmlattr>." + a.name))
                errors.push_back(path + ": missing attribute '" + a.name + "'");
    }
};

}  // namespace

std::vector<std::string> validate_xml(const std::string& xml, const std::string& xsd) {
    pt::ptree schema;
    try {
        std::istringstream in(xsd);
        pt::read_xml(in, schema);
    } catch (const pt::xml_parser_error& e) {
        throw FormatError(std::string("schema is not well-formed: ") + e.what());
    }
    const pt::ptree* root = nullptr;
    for (const auto& [key, child] : schema)
        if (local_name(key) == "schema") root = &child;
    if (!root) throw FormatError("schema has no <schema> root");
    std::vector<Decl> tops;
    for (const auto& [key, child] : *root)
        if (local_name(key) == "element") tops.push_back(parse_element(child));

    pt::ptree doc;
    try {
        std::istringstream in(xml);
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        return {std::string("document is not well-formed: ") + e.what()};
    }
    Validator v;
    std::vector<std::pair<std::string, const pt::ptree*>> roots;
    for (const auto& [key, child] : doc)
        if (!is_meta(key)) roots.emplace_back(key, &child);
    if (roots.size() != 1) return {"document must have exactly one root element"};
    const auto it = std::find_if(tops.begin(), tops.end(), [&](const Decl& d) { return d.name == roots[0].first; });
    if (it == tops.end()) return {"root element <" + roots[0].first + "> is not declared"};
    v.element("/" + roots[0].first, *roots[0].second, *it);
    return v.errors;
}

}  // namespace elseg::annotate
